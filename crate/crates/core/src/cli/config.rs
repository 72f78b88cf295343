//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! surface = catenoid
//! surface.a = 1.5
//! grid.count = 96
//! grid.axis0.lo = -1.2
//! stencil.backend = jets
//! tasks = analyze, willmore
//! seeds = 3, 4
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{Axis, Backend, ParamGrid, StencilConfig};
use crate::catalog::{catalog, CatalogParams};
use crate::error::{Error, Result};
use crate::spaceform::Immersion;
use crate::willmore::WillmoreForm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Analyze,
    Invariance,
    Willmore,
    Variation,
    Isotropy,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Analyze, Task::Invariance, Task::Willmore, Task::Variation, Task::Isotropy];

    pub fn name(self) -> &'static str {
        match self {
            Task::Analyze => "analyze",
            Task::Invariance => "invariance",
            Task::Willmore => "willmore",
            Task::Variation => "variation",
            Task::Isotropy => "isotropy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

/// Raw key-value pairs in file order, later keys overriding earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key '{k}'", no + 1)));
            }
            kv.map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(kv)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        self.map.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.map.insert(key.into(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number"))))
            .transpose()
    }

    fn int(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| v.parse::<usize>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a count"))))
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("{key}: '{v}' is not a boolean"))),
            })
            .transpose()
    }
}

/// Validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub surface: String,
    pub params: CatalogParams,
    pub grid: ParamGrid,
    pub stencil: StencilConfig,
    pub tasks: Vec<Task>,
    pub seeds: Vec<u64>,
    pub maps: usize,
    pub bumps: usize,
    pub t_step: Option<f64>,
    pub willmore_form: WillmoreForm,
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: Option<PathBuf>,
}

const KNOWN_TOP: &[&str] = &["surface", "grid", "stencil", "tasks", "seeds", "tolerance", "output_dir", "willmore", "variation", "invariance", "isotropy"];

impl RunConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        for (k, _) in kv.iter() {
            let top = k.split('.').next().unwrap_or("");
            if !KNOWN_TOP.contains(&top) {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }
        let surface = kv.get("surface").ok_or_else(|| Error::Config("missing key 'surface'".into()))?.to_string();
        let mut params = CatalogParams::default();
        for (k, v) in kv.iter() {
            if let Some(p) = k.strip_prefix("surface.") {
                if p == "expr" {
                    params.expr = Some(v.clone());
                } else {
                    let x = v.parse::<f64>().map_err(|_| Error::Config(format!("{k}: '{v}' is not a number")))?;
                    params.values.insert(p.to_string(), x);
                }
            }
        }
        let imm = catalog(&surface, &params)?;
        let mut axes: Vec<Axis> = imm.grid.axes().to_vec();
        if let Some(n) = kv.int("grid.count")? {
            axes.iter_mut().for_each(|a| a.count = n);
        }
        for (k, a) in axes.iter_mut().enumerate() {
            let p = format!("grid.axis{k}.");
            if let Some(n) = kv.int(&(p.clone() + "count"))? {
                a.count = n;
            }
            if let Some(x) = kv.num(&(p.clone() + "lo"))? {
                a.lo = x;
            }
            if let Some(x) = kv.num(&(p.clone() + "hi"))? {
                a.hi = x;
            }
            if let Some(b) = kv.flag(&(p + "periodic"))? {
                a.periodic = b;
            }
        }
        for (k, _) in kv.iter() {
            if let Some(rest) = k.strip_prefix("grid.axis") {
                let idx: usize = rest.split('.').next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
                if idx >= axes.len() {
                    return Err(Error::Config(format!("'{k}': surface has {} axes", axes.len())));
                }
            }
        }
        let grid = ParamGrid::new(axes).map_err(|e| match e {
            Error::GridTooCoarse { .. } => e,
            other => Error::Config(other.to_string()),
        })?;
        let order = kv.int("stencil.order")?.unwrap_or(6);
        let backend = match kv.get("stencil.backend").unwrap_or("jets") {
            "jets" => Backend::AnalyticJets,
            "fd" => Backend::FiniteDifference,
            b => return Err(Error::Config(format!("stencil.backend: '{b}' (use jets or fd)"))),
        };
        let jet_order = kv.int("stencil.jet_order")?.unwrap_or(4);
        if backend == Backend::AnalyticJets && !(2..=8).contains(&jet_order) {
            return Err(Error::Config(format!("stencil.jet_order {jet_order} outside 2..=8")));
        }
        let stencil = StencilConfig::new(order, backend, jet_order).map_err(|e| Error::Config(e.to_string()))?;
        grid.validate_for(order)?;
        let tasks = match kv.get("tasks") {
            Some(t) => {
                let mut v: Vec<Task> = split_list(t).map(Task::parse).collect::<Result<_>>()?;
                v.sort();
                v.dedup();
                v
            }
            None => Vec::new(),
        };
        let seeds = match kv.get("seeds") {
            Some(s) => split_list(s)
                .map(|x| x.parse::<u64>().map_err(|_| Error::Config(format!("seeds: '{x}' is not an integer"))))
                .collect::<Result<Vec<_>>>()?,
            None => vec![0],
        };
        if seeds.is_empty() {
            return Err(Error::Config("seeds: empty list".into()));
        }
        let willmore_form = match kv.get("willmore.form").unwrap_or("reduced") {
            "reduced" => WillmoreForm::Reduced,
            "hessian" => WillmoreForm::Hessian,
            f => return Err(Error::Config(format!("willmore.form: '{f}' (use reduced or hessian)"))),
        };
        let mut tolerances = BTreeMap::new();
        for (k, _) in kv.iter() {
            if let Some(name) = k.strip_prefix("tolerance.") {
                tolerances.insert(name.to_string(), kv.num(k)?.unwrap_or_default());
            }
        }
        Ok(Self {
            surface,
            params,
            grid,
            stencil,
            tasks,
            seeds,
            maps: kv.int("invariance.maps")?.unwrap_or(10),
            bumps: kv.int("variation.bumps")?.unwrap_or(5),
            t_step: kv.num("variation.t_step")?,
            willmore_form,
            tolerances,
            output_dir: kv.get("output_dir").map(PathBuf::from),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text)?)
    }

    /// The immersion on the configured grid.
    pub fn immersion(&self) -> Result<Immersion> {
        Ok(catalog(&self.surface, &self.params)?.with_grid(self.grid.clone()))
    }

    /// `count` seeds: the configured list, extended by a ChaCha8 stream
    /// seeded with its last entry.
    pub fn derived_seeds(&self, count: usize) -> Vec<u64> {
        let mut out: Vec<u64> = self.seeds.iter().copied().take(count).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(*self.seeds.last().expect("non-empty seeds"));
        while out.len() < count {
            out.push(rng.next_u64() >> 16);
        }
        out
    }

    /// Configured override or `default`.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Canonical key-value echo, one entry per line.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = vec![("surface".to_string(), self.surface.clone())];
        for (k, x) in &self.params.values {
            v.push((format!("surface.{k}"), super::report::num(*x)));
        }
        if let Some(e) = &self.params.expr {
            v.push(("surface.expr".into(), e.clone()));
        }
        for (k, a) in self.grid.axes().iter().enumerate() {
            v.push((format!("grid.axis{k}.lo"), super::report::num(a.lo)));
            v.push((format!("grid.axis{k}.hi"), super::report::num(a.hi)));
            v.push((format!("grid.axis{k}.count"), a.count.to_string()));
            v.push((format!("grid.axis{k}.periodic"), a.periodic.to_string()));
        }
        v.push(("stencil.order".into(), self.stencil.order.to_string()));
        v.push((
            "stencil.backend".into(),
            match self.stencil.backend {
                Backend::AnalyticJets => "jets".into(),
                Backend::FiniteDifference => "fd".into(),
            },
        ));
        if self.stencil.backend == Backend::AnalyticJets {
            v.push(("stencil.jet_order".into(), self.stencil.jet_order.to_string()));
        }
        v.push(("tasks".into(), self.tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")));
        v.push(("seeds".into(), self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")));
        v.push(("invariance.maps".into(), self.maps.to_string()));
        v.push(("variation.bumps".into(), self.bumps.to_string()));
        if let Some(t) = self.t_step {
            v.push(("variation.t_step".into(), super::report::num(t)));
        }
        v.push(("willmore.form".into(), self.willmore_form.name().into()));
        for (k, x) in &self.tolerances {
            v.push((format!("tolerance.{k}"), super::report::num(*x)));
        }
        v
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split([',', ' ']).map(str::trim).filter(|x| !x.is_empty())
}
