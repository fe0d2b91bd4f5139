//! Fixed-step explicit Heun integration of a linear block diagram whose
//! blocks are delay-differential realizations.
//!
//! Every delay is an integer number of steps, so both Heun stages (at `t_n`
//! and `t_{n+1}`) read delayed values straight from the stored grid history.

use super::realization::DdeRealization;
use super::SimulationError;

/// Relative tolerance for a delay to count as a whole number of steps.
pub const STEP_ALIGNMENT_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Block(usize),
    External(usize),
}

/// `weight · source`, optionally multiplied by the gate value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Connection {
    pub source: Source,
    pub weight: f64,
    pub gated: bool,
}

impl Connection {
    pub fn new(source: Source, weight: f64) -> Self {
        Connection {
            source,
            weight,
            gated: false,
        }
    }

    pub fn gated(source: Source, weight: f64) -> Self {
        Connection {
            source,
            weight,
            gated: true,
        }
    }
}

/// Time profile of the gate applied to gated connections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Open,
    Closed,
    /// 0 before `at`, 1 from `at` on.
    Step { at: f64 },
    /// Linear rise from 0 at `at` to 1 at `at + duration`.
    Ramp { at: f64, duration: f64 },
}

impl Gate {
    pub fn value(&self, t: f64, h: f64) -> f64 {
        let eps = 1e-9 * h;
        match *self {
            Gate::Open => 1.0,
            Gate::Closed => 0.0,
            Gate::Step { at } => {
                if t >= at - eps {
                    1.0
                } else {
                    0.0
                }
            }
            Gate::Ramp { at, duration } => {
                if t < at - eps {
                    0.0
                } else if duration <= 0.0 {
                    1.0
                } else {
                    ((t - at) / duration).clamp(0.0, 1.0)
                }
            }
        }
    }
}

/// Constant pre-history of a block's internal signal: `z(t) = value` for `t ≤ 0`,
/// all derivatives zero.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PreHistory {
    pub value: f64,
}

pub struct BlockSpec {
    pub name: String,
    pub realization: DdeRealization,
    pub inputs: Vec<Connection>,
    pub pre_history: PreHistory,
}

pub type ExternalSignal = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Blocks, external signals, gate and named output probes.
pub struct Diagram {
    blocks: Vec<BlockSpec>,
    externals: Vec<ExternalSignal>,
    probes: Vec<(String, Vec<Connection>)>,
    gate: Gate,
}

/// Probe values on the uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagramRun {
    pub t: Vec<f64>,
    pub probes: Vec<(String, Vec<f64>)>,
}

impl DiagramRun {
    pub fn probe(&self, name: &str) -> Option<&[f64]> {
        self.probes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

impl Default for Diagram {
    fn default() -> Self {
        Self::new()
    }
}

impl Diagram {
    pub fn new() -> Self {
        Diagram {
            blocks: Vec::new(),
            externals: Vec::new(),
            probes: Vec::new(),
            gate: Gate::Open,
        }
    }

    /// Adds a block without inputs; wire it with [`Diagram::connect`].
    pub fn add_block(&mut self, name: &str, realization: DdeRealization, pre_history: PreHistory) -> usize {
        self.blocks.push(BlockSpec {
            name: name.to_string(),
            realization,
            inputs: Vec::new(),
            pre_history,
        });
        self.blocks.len() - 1
    }

    pub fn add_external(&mut self, signal: ExternalSignal) -> usize {
        self.externals.push(signal);
        self.externals.len() - 1
    }

    pub fn connect(&mut self, block: usize, connection: Connection) {
        self.blocks[block].inputs.push(connection);
    }

    pub fn add_probe(&mut self, name: &str, connections: Vec<Connection>) {
        self.probes.push((name.to_string(), connections));
    }

    pub fn set_gate(&mut self, gate: Gate) {
        self.gate = gate;
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    /// Evaluation order over feedthrough edges; errors on an algebraic loop.
    pub fn evaluation_order(&self) -> Result<Vec<usize>, SimulationError> {
        let nb = self.blocks.len();
        let mut indegree = vec![0usize; nb];
        let mut successors = vec![Vec::new(); nb];
        for (dst, b) in self.blocks.iter().enumerate() {
            for c in &b.inputs {
                if let Source::Block(src) = c.source {
                    if self.blocks[src].realization.feedthrough != 0.0 {
                        indegree[dst] += 1;
                        successors[src].push(dst);
                    }
                }
            }
        }
        let mut ready: Vec<usize> = (0..nb).filter(|&b| indegree[b] == 0).collect();
        let mut order = Vec::with_capacity(nb);
        while let Some(b) = ready.pop() {
            order.push(b);
            for &s in &successors[b] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(s);
                }
            }
        }
        if order.len() < nb {
            let stuck = (0..nb)
                .filter(|b| !order.contains(b))
                .map(|b| self.blocks[b].name.clone())
                .collect();
            return Err(SimulationError::AlgebraicLoop(stuck));
        }
        Ok(order)
    }

    /// Integrates from `t = 0` to `t_end` with step `h`; records
    /// `floor(t_end/h) + 1` samples.
    pub fn simulate(&self, h: f64, t_end: f64) -> Result<DiagramRun, SimulationError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(SimulationError::InvalidScenario(format!(
                "step must be positive, got {h}"
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(SimulationError::InvalidScenario(format!(
                "end time must be nonnegative, got {t_end}"
            )));
        }
        let order = self.evaluation_order()?;
        let steps = (t_end / h + 1e-9).floor() as usize;
        let mut engine = Engine::compile(self, h, order, steps + 1)?;
        let mut t_grid = Vec::with_capacity(steps + 1);
        let mut probes: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); self.probes.len()];

        let mut x = engine.initial_state();
        let mut predictor = vec![0.0; x.len()];
        let mut k1 = vec![0.0; x.len()];
        let mut k2 = vec![0.0; x.len()];
        for idx in 0..=steps {
            let t = idx as f64 * h;
            engine.stage(self, t, idx, &x, &mut k1);
            engine.record();
            t_grid.push(t);
            for (p, (_, conns)) in probes.iter_mut().zip(&self.probes) {
                p.push(engine.combine(conns));
            }
            if idx == steps {
                break;
            }
            for i in 0..x.len() {
                predictor[i] = x[i] + h * k1[i];
            }
            engine.stage(self, t + h, idx + 1, &predictor, &mut k2);
            for i in 0..x.len() {
                x[i] += 0.5 * h * (k1[i] + k2[i]);
            }
        }
        Ok(DiagramRun {
            t: t_grid,
            probes: self
                .probes
                .iter()
                .map(|(n, _)| n.clone())
                .zip(probes)
                .collect(),
        })
    }
}

#[derive(Clone, Copy)]
struct StepTerm {
    steps: usize,
    order: usize,
    coeff: f64,
}

struct CompiledBlock {
    n: usize,
    offset: usize,
    recurrence: Vec<StepTerm>,
    /// Output terms except the undelayed order-`n` one.
    output: Vec<StepTerm>,
    direct: f64,
    input_gain: f64,
    feedthrough: f64,
    /// `history[k][i] = z^{(k)}(i·h)`
    history: Vec<Vec<f64>>,
    pre: Vec<f64>,
}

impl CompiledBlock {
    #[inline]
    fn read(&self, x: &[f64], idx: usize, term: &StepTerm) -> f64 {
        if term.steps == 0 {
            return x[self.offset + term.order];
        }
        match idx.checked_sub(term.steps) {
            Some(j) => self.history[term.order][j],
            None => self.pre[term.order],
        }
    }
}

struct Engine {
    blocks: Vec<CompiledBlock>,
    order: Vec<usize>,
    state_len: usize,
    base: Vec<f64>,
    recur: Vec<f64>,
    input: Vec<f64>,
    output: Vec<f64>,
    zn: Vec<f64>,
    externals: Vec<f64>,
    gate: f64,
    h: f64,
    x_snapshot: Vec<f64>,
}

fn to_steps(block: &str, delay: f64, h: f64) -> Result<usize, SimulationError> {
    let ratio = delay / h;
    let steps = ratio.round();
    if (ratio - steps).abs() > STEP_ALIGNMENT_REL * ratio.max(1.0) || (delay > 0.0 && steps < 1.0) {
        return Err(SimulationError::StepMismatch {
            block: block.to_string(),
            delay,
            step: h,
        });
    }
    Ok(steps as usize)
}

impl Engine {
    fn compile(d: &Diagram, h: f64, order: Vec<usize>, capacity: usize) -> Result<Self, SimulationError> {
        let mut blocks = Vec::with_capacity(d.blocks.len());
        let mut offset = 0;
        for spec in &d.blocks {
            let r = &spec.realization;
            let n = r.order;
            let compile = |terms: &[super::realization::RealizationTerm]| {
                terms
                    .iter()
                    .map(|t| {
                        Ok(StepTerm {
                            steps: to_steps(&spec.name, t.delay, h)?,
                            order: t.order,
                            coeff: t.coeff,
                        })
                    })
                    .collect::<Result<Vec<_>, SimulationError>>()
            };
            let recurrence = compile(&r.recurrence)?;
            let all_out = compile(&r.output)?;
            let mut direct = 0.0;
            let mut output = Vec::new();
            for t in all_out {
                if t.steps == 0 && t.order == n {
                    direct += t.coeff;
                } else {
                    output.push(t);
                }
            }
            let mut pre = vec![0.0; n + 1];
            pre[0] = spec.pre_history.value;
            blocks.push(CompiledBlock {
                n,
                offset,
                recurrence,
                output,
                direct,
                input_gain: r.input_gain,
                feedthrough: r.feedthrough,
                history: (0..=n).map(|_| Vec::with_capacity(capacity)).collect(),
                pre,
            });
            offset += n;
        }
        let nb = blocks.len();
        Ok(Engine {
            blocks,
            order,
            state_len: offset,
            base: vec![0.0; nb],
            recur: vec![0.0; nb],
            input: vec![0.0; nb],
            output: vec![0.0; nb],
            zn: vec![0.0; nb],
            externals: vec![0.0; d.externals.len()],
            gate: 0.0,
            h,
            x_snapshot: vec![0.0; offset],
        })
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.state_len];
        for b in &self.blocks {
            if b.n > 0 {
                x[b.offset] = b.pre[0];
            }
        }
        x
    }

    fn source_value(&self, s: Source) -> f64 {
        match s {
            Source::Block(b) => self.output[b],
            Source::External(e) => self.externals[e],
        }
    }

    fn combine(&self, conns: &[Connection]) -> f64 {
        conns
            .iter()
            .map(|c| {
                let g = if c.gated { self.gate } else { 1.0 };
                c.weight * g * self.source_value(c.source)
            })
            .sum()
    }

    /// Evaluates all signals at `(t, x)`, writing `dx/dt` into `dx`.
    fn stage(&mut self, d: &Diagram, t: f64, idx: usize, x: &[f64], dx: &mut [f64]) {
        for (e, f) in self.externals.iter_mut().zip(&d.externals) {
            *e = f(t);
        }
        self.gate = d.gate.value(t, self.h);
        for (b, blk) in self.blocks.iter().enumerate() {
            let recur: f64 = blk
                .recurrence
                .iter()
                .map(|term| term.coeff * blk.read(x, idx, term))
                .sum();
            let out: f64 = blk
                .output
                .iter()
                .map(|term| term.coeff * blk.read(x, idx, term))
                .sum();
            self.recur[b] = recur;
            self.base[b] = out + blk.direct * recur;
            self.output[b] = self.base[b];
        }
        for i in 0..self.order.len() {
            let b = self.order[i];
            let u = self.combine(&d.blocks[b].inputs);
            self.input[b] = u;
            self.output[b] = self.base[b] + self.blocks[b].feedthrough * u;
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let zn = blk.input_gain * self.input[b] + self.recur[b];
            self.zn[b] = zn;
            if blk.n > 0 {
                let o = blk.offset;
                for k in 0..blk.n - 1 {
                    dx[o + k] = x[o + k + 1];
                }
                dx[o + blk.n - 1] = zn;
            }
        }
        self.x_snapshot.copy_from_slice(x);
    }

    /// Appends the values of the most recent stage to the history.
    fn record(&mut self) {
        for (b, blk) in self.blocks.iter_mut().enumerate() {
            for k in 0..blk.n {
                blk.history[k].push(self.x_snapshot[blk.offset + k]);
            }
            blk.history[blk.n].push(self.zn[b]);
        }
    }
}
