//! Explicit Runge–Kutta integration of complex ODE systems: Dormand–Prince
//! 5(4) and the 8th-order DOP853 pair with its 5th/3rd-order error
//! estimator.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];


const DOP853_C: [f64; 12] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0];
const DOP853_A: [[f64; 12]; 12] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
];
const DOP853_B: [f64; 12] = [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259];
const DOP853_E3: [f64; 12] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082];
const DOP853_E5: [f64; 12] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Method {
    Dopri5,
    #[default]
    Dop853,
}

impl Method {
    /// Nominal order of the propagated solution.
    pub fn order(self) -> u32 {
        match self {
            Method::Dopri5 => 5,
            Method::Dop853 => 8,
        }
    }

    fn stages(self) -> usize {
        match self {
            Method::Dopri5 => 7,
            Method::Dop853 => 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Local error target per unit time.
    pub tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Take uniform steps of this size with no error control.
    pub fixed_step: Option<f64>,
    pub method: Method,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            initial_step: 1e-3,
            max_step: 0.05,
            min_step: 1e-12,
            max_steps: 50_000_000,
            fixed_step: None,
            method: Method::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Largest accepted local error estimate.
    pub max_error_estimate: f64,
    /// Last accepted step size (useful for warm starts).
    pub last_step: f64,
}

impl OdeStats {
    fn merge(&mut self, other: &OdeStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evaluations += other.rhs_evaluations;
        self.max_error_estimate = self.max_error_estimate.max(other.max_error_estimate);
        self.last_step = other.last_step;
    }
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (either direction),
/// stepping exactly onto every entry of `stops` that lies strictly inside
/// the interval.
pub fn integrate<F>(mut f: F, y: &mut [C64], t0: f64, t1: f64, stops: &[f64], control: &StepControl) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut marks: Vec<f64> = stops.iter().copied().filter(|&s| (s - t0) * dir > 0.0 && (t1 - s) * dir > 0.0).collect();
    marks.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    marks.push(t1);
    let mut stats = OdeStats::default();
    let mut ws = Workspace::new(y.len(), control.method);
    let mut h = control.initial_step;
    let mut t = t0;
    for &end in &marks {
        let seg = match control.fixed_step {
            Some(step) => fixed(&mut f, y, t, end, step, &mut ws)?,
            None => adaptive(&mut f, y, t, end, h, control, &mut ws)?,
        };
        if seg.last_step > 0.0 {
            h = seg.last_step;
        }
        stats.merge(&seg);
        t = end;
    }
    Ok(stats)
}

struct Workspace {
    method: Method,
    k: Vec<Vec<C64>>,
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    fsal_valid: bool,
}

impl Workspace {
    fn new(n: usize, method: Method) -> Self {
        Self {
            method,
            k: (0..method.stages()).map(|_| vec![ZERO; n]).collect(),
            ytmp: vec![ZERO; n],
            ynew: vec![ZERO; n],
            fsal_valid: false,
        }
    }
}

/// `out = y + h Σ_j a_j k_j`.
fn combine(y: &[C64], k: &[Vec<C64>], a: &[f64], h: f64, out: &mut [C64]) {
    out.copy_from_slice(y);
    for (kj, &aj) in k.iter().zip(a) {
        if aj != 0.0 {
            let w = h * aj;
            for (o, x) in out.iter_mut().zip(kj) {
                *o += x * w;
            }
        }
    }
}

fn weighted_norm(k: &[Vec<C64>], e: &[f64], n: usize) -> (f64, f64) {
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for i in 0..n {
        let mut acc = ZERO;
        for (kj, &ej) in k.iter().zip(e) {
            if ej != 0.0 {
                acc += kj[i] * ej;
            }
        }
        sq += acc.norm_sqr();
        max = max.max(acc.norm());
    }
    (sq, max)
}

/// One step of signed size `h`; leaves the proposal in `ws.ynew` and
/// returns the local error estimate.
fn step<F>(f: &mut F, y: &[C64], t: f64, h: f64, ws: &mut Workspace, evals: &mut usize) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if !ws.fsal_valid {
        f(t, y, &mut ws.k[0]);
        *evals += 1;
    }
    let stages = ws.method.stages();
    for s in 1..stages {
        let row: &[f64] = match ws.method {
            Method::Dopri5 => &A[s][..s],
            Method::Dop853 => &DOP853_A[s][..s],
        };
        let c = match ws.method {
            Method::Dopri5 => C[s],
            Method::Dop853 => DOP853_C[s],
        };
        combine(y, &ws.k[..s], row, h, &mut ws.ytmp);
        f(t + c * h, &ws.ytmp, &mut ws.k[s]);
        *evals += 1;
    }
    match ws.method {
        Method::Dopri5 => {
            // FSAL: the last stage is evaluated at the fifth-order solution.
            ws.ynew.copy_from_slice(&ws.ytmp);
            weighted_norm(&ws.k, &E, y.len()).1 * h.abs()
        }
        Method::Dop853 => {
            combine(y, &ws.k, &DOP853_B, h, &mut ws.ynew);
            let (e5, _) = weighted_norm(&ws.k, &DOP853_E5, y.len());
            let (e3, _) = weighted_norm(&ws.k, &DOP853_E3, y.len());
            if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                h.abs() * e5 / (e5 + 0.01 * e3).sqrt()
            }
        }
    }
}

fn accept(y: &mut [C64], ws: &mut Workspace) {
    y.copy_from_slice(&ws.ynew);
    match ws.method {
        Method::Dopri5 => {
            ws.k.swap(0, 6);
            ws.fsal_valid = true;
        }
        Method::Dop853 => ws.fsal_valid = false,
    }
}

fn adaptive<F>(f: &mut F, y: &mut [C64], t0: f64, t1: f64, h0: f64, control: &StepControl, ws: &mut Workspace) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let mut stats = OdeStats::default();
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(stats);
    }
    let dir = (t1 - t0).signum();
    ws.fsal_valid = false;
    let mut t = t0;
    let mut h = h0.abs().min(control.max_step).max(control.min_step);
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= span * 1e-14 {
            break;
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let err = step(f, y, t, hs * dir, ws, &mut stats.rhs_evaluations);
        let allowed = control.tol * hs;
        if err.is_nan() {
            return Err(Error::Propagation {
                time: t,
                message: "non-finite error estimate".into(),
            });
        }
        let exponent = 1.0 / control.method.order() as f64;
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(exponent)).clamp(0.2, 5.0) };
        if err <= allowed {
            accept(y, ws);
            t = if last { t1 } else { t + hs * dir };
            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            stats.last_step = hs;
            h = (hs * factor).min(control.max_step);
            if last {
                // keep the unclipped step as the warm start for the next segment
                stats.last_step = h.max(hs);
            }
        } else {
            stats.rejected += 1;
            // k[0] still holds f(t, y)
            ws.fsal_valid = true;
            h = hs * factor;
            if h < control.min_step {
                return Err(Error::Propagation {
                    time: t,
                    message: format!("step size underflow ({h:.3e} ns) with error estimate {err:.3e}"),
                });
            }
        }
        if stats.accepted + stats.rejected > control.max_steps {
            return Err(Error::Propagation {
                time: t,
                message: format!("exceeded {} steps", control.max_steps),
            });
        }
    }
    Ok(stats)
}

fn fixed<F>(f: &mut F, y: &mut [C64], t0: f64, t1: f64, step_size: f64, ws: &mut Workspace) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if !(step_size > 0.0) {
        return Err(Error::InvalidArgument(format!("fixed step {step_size} must be positive")));
    }
    let mut stats = OdeStats::default();
    let n = ((t1 - t0).abs() / step_size).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    ws.fsal_valid = false;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let err = step(f, y, t, h, ws, &mut stats.rhs_evaluations);
        accept(y, ws);
        stats.accepted += 1;
        stats.max_error_estimate = stats.max_error_estimate.max(err);
    }
    stats.last_step = h.abs();
    Ok(stats)
}
