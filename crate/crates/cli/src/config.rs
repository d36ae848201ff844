//! Experiment configuration: `key = value` lines under `[section]` headers.
//! Every key is optional; defaults depend on the equation.

use ini::Ini;
use soliton_core::experiments::{EvolveSpec, HorizonRule};
use soliton_core::groundstate::RadialSolverOptions;
use soliton_core::{Landscape, Model};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub evolve: EvolveSpec,
    pub h_list: Vec<f64>,
    pub horizon: HorizonRule,
    pub eps_scale: f64,
    pub eps_power: f64,
    pub richardson: bool,
    pub radial: RadialSolverOptions,
    pub spectral_n_basis: usize,
    pub spectral_tol: f64,
    pub ode_deltas: Vec<f64>,
    pub ode_scale: f64,
    pub ode_dt: f64,
    pub ode_a0: Vec<f64>,
    pub ode_v0: Vec<f64>,
}

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["equation"]),
    ("potential", &["kind", "amplitude", "wave", "phase", "value", "slope", "matrix", "center", "width"]),
    ("grid", &["points", "box"]),
    ("time", &["dt", "t_final", "observe_dt", "horizon", "c1", "c2", "delta"]),
    ("initial", &["a0", "v0", "eps_scale", "eps_power", "seed"]),
    ("sweep", &["h", "h_list", "richardson"]),
    ("fit", &["enabled", "corrector_every", "tol"]),
    ("ground_state", &["points", "r_max", "tol"]),
    ("spectral", &["n_basis", "tol"]),
    ("ode_compare", &["deltas", "scale", "dt", "a0", "v0"]),
];

struct Reader<'a> {
    ini: &'a Ini,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.section(Some(section)).and_then(|p| p.get(key)).map(str::trim)
    }

    fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| ConfigError(format!("[{section}] {key}: `{s}` is not a number"))),
        }
    }

    fn usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| ConfigError(format!("[{section}] {key}: `{s}` is not a count"))),
        }
    }

    fn bool(&self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(section, key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(s) => Err(ConfigError(format!("[{section}] {key}: `{s}` is not a boolean"))),
        }
    }

    fn list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| ConfigError(format!("[{section}] {key}: `{x}` is not a number"))))
                .collect(),
        }
    }

    fn vector(&self, section: &str, key: &str, default: &[f64], dim: usize) -> Result<Vec<f64>, ConfigError> {
        let v = self.list(section, key, default)?;
        if v.len() != dim {
            return Err(ConfigError(format!("[{section}] {key}: expected {dim} components, got {}", v.len())));
        }
        Ok(v)
    }
}

fn unit(dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

fn check_keys(ini: &Ini) -> Result<(), ConfigError> {
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((k, _)) = props.iter().next() {
                return Err(ConfigError(format!("key `{k}` outside any section")));
            }
            continue;
        };
        let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == section) else {
            return Err(ConfigError(format!("unknown section [{section}]")));
        };
        for (k, _) in props.iter() {
            if !keys.contains(&k) {
                return Err(ConfigError(format!("unknown key `{k}` in [{section}]")));
            }
        }
    }
    Ok(())
}

fn landscape(r: &Reader, model: Model) -> Result<Landscape, ConfigError> {
    let d = model.dim();
    let s = "potential";
    let kind = r.raw(s, "kind").unwrap_or("cosine").to_ascii_lowercase();
    let default_amp = if model == Model::Hartree3d { -1.0 } else { 1.0 };
    let center = |r: &Reader| r.vector(s, "center", &vec![0.0; d], d);
    let land = match kind.as_str() {
        "cosine" | "cos" => Landscape::Cosine {
            amplitude: r.f64(s, "amplitude", default_amp)?,
            wave: r.vector(s, "wave", &unit(d), d)?,
            phase: r.f64(s, "phase", 0.0)?,
        },
        "constant" => Landscape::Constant { value: r.f64(s, "value", 0.0)? },
        "linear" => Landscape::Linear { slope: r.vector(s, "slope", &unit(d), d)? },
        "quadratic" => {
            let mut id = vec![0.0; d * d];
            (0..d).for_each(|j| id[j * d + j] = 1.0);
            Landscape::Quadratic { matrix: r.vector(s, "matrix", &id, d * d)?, center: center(r)? }
        }
        "gaussian" => Landscape::Gaussian {
            amplitude: r.f64(s, "amplitude", 1.0)?,
            width: r.f64(s, "width", 1.0)?,
            center: center(r)?,
        },
        other => return Err(ConfigError(format!("[potential] kind: unknown landscape `{other}`"))),
    };
    land.validate(d).map_err(|e| ConfigError(e.to_string()))?;
    Ok(land)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        check_keys(&ini)?;
        let r = Reader { ini: &ini };
        let model = match r.raw("run", "equation") {
            None => Model::Gp1d,
            Some(s) => Model::parse(s).map_err(|e| ConfigError(e.to_string()))?,
        };
        let d = model.dim();
        let mut ev = match model {
            Model::Gp1d => EvolveSpec::gp_default(),
            Model::Hartree3d => EvolveSpec::hartree_default(),
        };
        ev.landscape = landscape(&r, model)?;
        ev.points = r.usize("grid", "points", ev.points)?;
        ev.box_len = r.f64("grid", "box", ev.box_len)?;
        ev.dt = r.f64("time", "dt", ev.dt)?;
        ev.t_final = r.f64("time", "t_final", ev.t_final)?;
        ev.observe_dt = r.f64("time", "observe_dt", ev.observe_dt)?;
        ev.a0 = r.vector("initial", "a0", &ev.a0, d)?;
        ev.v0 = r.vector("initial", "v0", &ev.v0, d)?;
        ev.seed = r.usize("initial", "seed", ev.seed as usize)? as u64;
        ev.h = r.f64("sweep", "h", ev.h)?;
        ev.fit = r.bool("fit", "enabled", ev.fit)?;
        ev.corrector_every = r.usize("fit", "corrector_every", ev.corrector_every)?;
        ev.fit_tol = r.f64("fit", "tol", ev.fit_tol)?;

        let delta = r.f64("time", "delta", 0.0)?;
        if !(0.0..=0.5).contains(&delta) {
            return Err(ConfigError(format!("[time] delta must lie in [0, 1/2], got {delta}")));
        }
        let horizon = match r.raw("time", "horizon").unwrap_or("fixed") {
            "fixed" => HorizonRule::Fixed { t: ev.t_final },
            "theorem" => HorizonRule::Theorem { c1: r.f64("time", "c1", 1.0)?, c2: r.f64("time", "c2", 1.0)?, delta },
            other => return Err(ConfigError(format!("[time] horizon: expected fixed or theorem, got `{other}`"))),
        };
        ev.t_final = horizon.horizon(ev.h);
        let eps_scale = r.f64("initial", "eps_scale", 0.0)?;
        let eps_power = r.f64("initial", "eps_power", 0.6)?;
        ev.eps0 = eps_scale * ev.h.powf(eps_power);

        let h_list = r.list("sweep", "h_list", &[0.1, 0.05, 0.025])?;
        for h in h_list.iter().chain([&ev.h]) {
            if !(*h > 0.0 && *h <= 1.0) {
                return Err(ConfigError(format!("h = {h} outside (0, 1]")));
            }
        }
        ev.validate().map_err(|e| ConfigError(e.to_string()))?;
        let defaults = RadialSolverOptions::default();
        let radial = RadialSolverOptions {
            n: r.usize("ground_state", "points", defaults.n)?,
            r_max: r.f64("ground_state", "r_max", defaults.r_max)?,
            tol: r.f64("ground_state", "tol", defaults.tol)?,
            ..defaults
        };
        let ode_deltas = r.list("ode_compare", "deltas", &[0.0, 0.25])?;
        if ode_deltas.iter().any(|x| !(0.0..=0.5).contains(x)) {
            return Err(ConfigError("[ode_compare] deltas must lie in [0, 1/2]".into()));
        }
        Ok(Self {
            h_list,
            horizon,
            eps_scale,
            eps_power,
            richardson: r.bool("sweep", "richardson", true)?,
            radial,
            spectral_n_basis: r.usize("spectral", "n_basis", if d == 1 { 60 } else { 120 })?,
            spectral_tol: r.f64("spectral", "tol", 1e-10)?,
            ode_deltas,
            ode_scale: r.f64("ode_compare", "scale", 1.0)?,
            ode_dt: r.f64("ode_compare", "dt", 0.01)?,
            ode_a0: r.vector("ode_compare", "a0", &vec![0.0; d], d)?,
            ode_v0: r.vector("ode_compare", "v0", &vec![0.0; d], d)?,
            evolve: ev,
        })
    }
}
