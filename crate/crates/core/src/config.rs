//! Run configuration: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [problem]
//! example = porous
//! m = 2
//! [grid]
//! n_interior = 32
//! [time]
//! n_steps = 256
//! ```
//!
//! `problem.example`, `grid.n_interior` and `time.n_steps` are required;
//! everything else has a default. `;` or `#` after whitespace starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption};

use crate::error::{Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::haar::{HaarLevel, TimeGrid};
use crate::solver::{Example, GradientMode, ProblemSpec, SolverConfig};
use crate::wiener::QWienerSpec;

/// Initial datum selector.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// `amplitude · sin(kπx)`.
    Sine { k: usize, amplitude: f64 },
    /// `amplitude · exp(1 - 1/(1 - (2x-1)²))`.
    Bump { amplitude: f64 },
    Constant(f64),
    /// One value per interior node, separated by commas or whitespace.
    File(PathBuf),
}

impl InitialDatum {
    pub fn field(&self, grid: SpatialGrid) -> Result<Field> {
        use std::f64::consts::PI;
        Ok(match self {
            InitialDatum::Sine { k, amplitude } => Field::from_fn(grid, |x| amplitude * (*k as f64 * PI * x).sin()),
            InitialDatum::Bump { amplitude } => Field::from_fn(grid, |x| {
                let y = 2.0 * x - 1.0;
                if y.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - y * y)).exp()
                } else {
                    0.0
                }
            }),
            InitialDatum::Constant(c) => Field::constant(grid, *c),
            InitialDatum::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let values = text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: '{s}': {e}", path.display()))))
                    .collect::<Result<Vec<f64>>>()?;
                Field::new(grid, values)?
            }
        })
    }

    fn describe(&self) -> String {
        match self {
            InitialDatum::Sine { k, .. } => format!("sine({k})"),
            InitialDatum::Bump { .. } => "bump".into(),
            InitialDatum::Constant(c) => format!("constant({})", fmt_f64(*c)),
            InitialDatum::File(p) => format!("file({})", p.display()),
        }
    }

    fn amplitude(&self) -> Option<f64> {
        match self {
            InitialDatum::Sine { amplitude, .. } | InitialDatum::Bump { amplitude } => Some(*amplitude),
            _ => None,
        }
    }
}

/// What `simulate` feeds the frozen solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimulateMode {
    /// The staircase fixed point `w` and its solution `V(w)`.
    Staircase,
    /// The constant extension of the initial datum.
    Frozen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub example: Example,
    pub gradient_mode: GradientMode,
    pub c_sigma: f64,
    pub initial: InitialDatum,
    pub n_interior: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub level: u32,
    pub noise_modes: usize,
    pub noise_decay: f64,
    pub noise_trace: f64,
    pub paths: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub mode: SimulateMode,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub radius: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("problem", &["example", "m", "c_sigma", "gradient_mode", "initial", "initial_amplitude"]),
    ("grid", &["n_interior"]),
    ("time", &["horizon", "n_steps", "level"]),
    ("noise", &["modes", "decay", "trace"]),
    ("run", &["paths", "seed", "mode"]),
    ("solver", &["newton_tol", "newton_max_iter", "max_halvings", "max_retries"]),
    ("fixed_point", &["tol", "max_iter", "radius"]),
    ("output", &["dir"]),
];

struct Lookup {
    values: BTreeMap<String, String>,
}

impl Lookup {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| Error::MissingKey(key.into()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| Error::Config(format!("{key} = '{v}': {e}"))),
        }
    }

    fn parse_required<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.required(key)?;
        v.parse().map_err(|e| Error::Config(format!("{key} = '{v}': {e}")))
    }
}

/// Shortest text that parses back to `v`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn call_arg<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    text.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')').map(str::trim)
}

fn parse_initial(text: &str, amplitude: f64) -> Result<InitialDatum> {
    let bad = || Error::Config(format!("problem.initial = '{text}': expected sine(k), bump, constant(c) or file(path)"));
    if text == "bump" {
        return Ok(InitialDatum::Bump { amplitude });
    }
    if let Some(k) = call_arg(text, "sine") {
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        return Ok(InitialDatum::Sine { k, amplitude });
    }
    if let Some(c) = call_arg(text, "constant") {
        return Ok(InitialDatum::Constant(c.parse().map_err(|_| bad())?));
    }
    if let Some(p) = call_arg(text, "file") {
        return Ok(InitialDatum::File(PathBuf::from(p)));
    }
    Err(bad())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let opt = ParseOption { enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| Error::Config(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key '{k}' outside any [section]")));
                }
                continue;
            };
            let known = KNOWN
                .iter()
                .find(|(s, _)| *s == section)
                .ok_or_else(|| Error::Config(format!("unknown section [{section}]")))?;
            for (k, v) in props.iter() {
                if !known.1.contains(&k) {
                    return Err(Error::Config(format!("unknown key '{section}.{k}'")));
                }
                values.insert(format!("{section}.{k}"), v.trim().to_string());
            }
        }
        let l = Lookup { values };

        let m: f64 = l.parse("problem.m", 2.0)?;
        let example = match l.required("problem.example")? {
            "heat" => Example::HeatSqrtDrift,
            "porous" => Example::PorousSqrtDrift { m },
            "porous_gradient" => Example::PorousGradientNoise { m },
            other => {
                return Err(Error::Config(format!(
                    "problem.example = '{other}': expected heat, porous or porous_gradient"
                )))
            }
        };
        let gradient_mode = match l.raw("problem.gradient_mode").unwrap_or("divergence") {
            "divergence" => GradientMode::Divergence,
            "coefficient" => GradientMode::Coefficient,
            other => return Err(Error::Config(format!("problem.gradient_mode = '{other}': expected divergence or coefficient"))),
        };
        let amplitude = l.parse("problem.initial_amplitude", 0.1)?;
        let initial = parse_initial(l.raw("problem.initial").unwrap_or("sine(1)"), amplitude)?;
        let mode = match l.raw("run.mode").unwrap_or("staircase") {
            "staircase" => SimulateMode::Staircase,
            "frozen" => SimulateMode::Frozen,
            other => return Err(Error::Config(format!("run.mode = '{other}': expected staircase or frozen"))),
        };
        let defaults = SolverConfig::default();
        let radius = match l.raw("fixed_point.radius") {
            None => None,
            Some(_) => Some(l.parse_required("fixed_point.radius")?),
        };
        let cfg = RunConfig {
            example,
            gradient_mode,
            c_sigma: l.parse("problem.c_sigma", 0.1)?,
            initial,
            n_interior: l.parse_required("grid.n_interior")?,
            horizon: l.parse("time.horizon", 1.0)?,
            n_steps: l.parse_required("time.n_steps")?,
            level: l.parse("time.level", 3)?,
            noise_modes: l.parse("noise.modes", 8)?,
            noise_decay: l.parse("noise.decay", 1.0)?,
            noise_trace: l.parse("noise.trace", 0.2)?,
            paths: l.parse("run.paths", 16)?,
            seed: l.parse("run.seed", 0)?,
            solver: SolverConfig {
                newton_tol: l.parse("solver.newton_tol", defaults.newton_tol)?,
                newton_max_iter: l.parse("solver.newton_max_iter", defaults.newton_max_iter)?,
                max_halvings: l.parse("solver.max_halvings", defaults.max_halvings)?,
                max_retries: l.parse("solver.max_retries", defaults.max_retries)?,
            },
            mode,
            fp_tol: l.parse("fixed_point.tol", 0.0)?,
            fp_max_iter: l.parse("fixed_point.max_iter", 64)?,
            radius,
            out_dir: l.raw("output.dir").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-checks that every derived object can be built.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.paths == 0 {
            return Err(Error::Config("run.paths must be at least 1".into()));
        }
        if !(self.c_sigma.is_finite()) || !(self.fp_tol >= 0.0) || self.fp_max_iter == 0 {
            return Err(Error::Config("c_sigma must be finite, fixed_point.tol >= 0 and max_iter >= 1".into()));
        }
        if self.level == 0 {
            return Err(Error::Config("time.level must be at least 1".into()));
        }
        self.time().map_err(cfg)?;
        self.problem().map_err(cfg)?;
        self.solver.validate().map_err(cfg)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.n_interior)
    }

    pub fn time(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps, Some(self.level))
    }

    pub fn qwiener(&self) -> Result<QWienerSpec> {
        QWienerSpec::with_trace(self.noise_modes, self.noise_trace, self.noise_decay)
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let grid = self.grid()?;
        Ok(ProblemSpec::new(self.example, self.c_sigma, self.qwiener()?, self.initial.field(grid)?)?
            .with_gradient_mode(self.gradient_mode))
    }

    /// Level `n` with the initial datum as first-block seed.
    pub fn haar_level(&self) -> Result<HaarLevel> {
        HaarLevel::new(self.level, self.initial.field(self.grid()?)?)
    }

    /// Every resolved setting except the output directory, in a fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let (example, m) = match self.example {
            Example::HeatSqrtDrift => ("heat", None),
            Example::PorousSqrtDrift { m } => ("porous", Some(m)),
            Example::PorousGradientNoise { m } => ("porous_gradient", Some(m)),
        };
        let _ = writeln!(s, "[problem]\nexample = {example}");
        if let Some(m) = m {
            let _ = writeln!(s, "m = {}", fmt_f64(m));
        }
        let gm = match self.gradient_mode {
            GradientMode::Divergence => "divergence",
            GradientMode::Coefficient => "coefficient",
        };
        let _ = writeln!(s, "c_sigma = {}\ngradient_mode = {gm}\ninitial = {}", fmt_f64(self.c_sigma), self.initial.describe());
        if let Some(a) = self.initial.amplitude() {
            let _ = writeln!(s, "initial_amplitude = {}", fmt_f64(a));
        }
        let _ = writeln!(s, "\n[grid]\nn_interior = {}", self.n_interior);
        let _ = writeln!(s, "\n[time]\nhorizon = {}\nn_steps = {}\nlevel = {}", fmt_f64(self.horizon), self.n_steps, self.level);
        let _ = writeln!(
            s,
            "\n[noise]\nmodes = {}\ndecay = {}\ntrace = {}",
            self.noise_modes,
            fmt_f64(self.noise_decay),
            fmt_f64(self.noise_trace)
        );
        let mode = match self.mode {
            SimulateMode::Staircase => "staircase",
            SimulateMode::Frozen => "frozen",
        };
        let _ = writeln!(s, "\n[run]\npaths = {}\nseed = {}\nmode = {mode}", self.paths, self.seed);
        let c = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nnewton_tol = {}\nnewton_max_iter = {}\nmax_halvings = {}\nmax_retries = {}",
            fmt_f64(c.newton_tol),
            c.newton_max_iter,
            c.max_halvings,
            c.max_retries
        );
        let _ = writeln!(s, "\n[fixed_point]\ntol = {}\nmax_iter = {}", fmt_f64(self.fp_tol), self.fp_max_iter);
        if let Some(r) = self.radius {
            let _ = writeln!(s, "radius = {}", fmt_f64(r));
        }
        s
    }
}
