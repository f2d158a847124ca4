//! Scenario files: a common header plus kind-specific `[params]`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use lattice_fracture::constructions::{
    HealingParams, MicroTripleParams, MultilayerParams, PolygonalParams, RelaxationParams, Rigid, StraightCrackParams,
    TripleParams,
};
use lattice_fracture::geom::Vec2;
use lattice_fracture::minimize::Clamp;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    StraightCrack,
    PolygonalCrack,
    Staircase,
    TriplePoint,
    SurfaceRelaxation,
    Multilayer,
    MicrodeformedTriple,
    HealingDemo,
    SmallDeformation,
    Minimize,
    Wulff,
    GroundState,
}

impl Kind {
    pub fn needs_epsilons(self) -> bool {
        !matches!(self, Kind::Wulff | Kind::GroundState)
    }

    pub fn needs_domain(self) -> bool {
        !matches!(self, Kind::Wulff | Kind::GroundState | Kind::HealingDemo)
    }
}

/// A mesh size written as a number or as "1/n".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Num(f64),
    Text(String),
}

pub fn parse_epsilon(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
        None => s.parse::<f64>().ok(),
    };
    let Some(v) = v else {
        bail!("cannot read epsilon {s:?}; expected a number or \"1/n\"");
    };
    if !(v > 0.0 && v.is_finite()) {
        bail!("epsilon must be positive and finite, got {s}");
    }
    Ok(v)
}

impl Epsilon {
    pub fn value(&self) -> Result<f64> {
        match self {
            Epsilon::Num(v) if *v > 0.0 && v.is_finite() => Ok(*v),
            Epsilon::Num(v) => bail!("epsilon must be positive and finite, got {v}"),
            Epsilon::Text(s) => parse_epsilon(s).with_context(|| format!("bad epsilon {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub polygon: Vec<Vec2>,
    #[serde(default)]
    pub offset: Option<Vec2>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvgMode {
    All,
    #[default]
    Finest,
    None,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct File<P> {
    pub kind: Kind,
    #[serde(default)]
    pub epsilons: Vec<Epsilon>,
    #[serde(default = "one")]
    pub j_inf: f64,
    #[serde(default = "half")]
    pub s_threshold: f64,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub svg: SvgMode,
    #[serde(default)]
    pub domain: Option<DomainFile>,
    pub params: P,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaircaseScenario {
    pub nu: Vec2,
    pub xbar: Vec2,
    pub minus: Rigid,
    pub plus: Rigid,
    /// Absolute step length; overrides `k`.
    #[serde(default)]
    pub h: Option<f64>,
    /// Step length in units of ε.
    #[serde(default = "sixteen")]
    pub k: f64,
}

fn sixteen() -> f64 {
    16.0
}

/// Either explicit sector maps or the symmetric family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TripleSpec {
    Explicit(TripleParams),
    Symmetric(SymmetricTriple),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricTriple {
    pub x0: Vec2,
    pub angle: f64,
    pub push: f64,
    #[serde(default)]
    pub flipped: bool,
}

impl TripleSpec {
    pub fn params(&self) -> TripleParams {
        match self {
            TripleSpec::Explicit(p) => p.clone(),
            TripleSpec::Symmetric(s) => TripleParams::symmetric(s.x0, s.angle, s.push, s.flipped),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSearch {
    pub ds: Vec<f64>,
    #[serde(default = "unit_list")]
    pub compressions: Vec<f64>,
}

fn unit_list() -> Vec<f64> {
    vec![1.0]
}

/// A fixed strip placement, or a grid search over placements at every ε.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroScenario {
    pub triple: TripleSpec,
    #[serde(default)]
    pub search: Option<GridSearch>,
    #[serde(default)]
    pub ray: Option<usize>,
    #[serde(default)]
    pub sector: Option<usize>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub compression: Option<f64>,
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub images: Option<[Vec2; 2]>,
}

impl MicroScenario {
    pub fn fixed(&self) -> Result<Option<MicroTripleParams>> {
        match (self.ray, self.sector, self.d) {
            (Some(ray), Some(sector), Some(d)) => Ok(Some(MicroTripleParams {
                triple: self.triple.params(),
                ray,
                sector,
                d,
                compression: self.compression.unwrap_or(1.0),
                angle: self.angle.unwrap_or(0.0),
                images: self.images,
            })),
            (None, None, None) if self.search.is_some() => Ok(None),
            _ => bail!("microdeformed-triple needs either ray, sector and d, or a [params.search] table"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallScenario {
    pub nu: Vec2,
    pub xbar: Vec2,
    pub w: Vec2,
    #[serde(default)]
    pub omega_minus: f64,
    #[serde(default)]
    pub omega_plus: f64,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

fn three() -> usize {
    3
}

fn one_step() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeScenario {
    pub clamps: Vec<Clamp>,
    #[serde(default)]
    pub weak_layer: Option<f64>,
    #[serde(default = "one_step")]
    pub load_steps: usize,
    #[serde(default = "three")]
    pub stages: usize,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
}

fn samples_default() -> usize {
    360
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WulffScenario {
    #[serde(default = "samples_default")]
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateScenario {
    #[serde(default = "r_min_default")]
    pub r_min: f64,
    #[serde(default = "r_max_default")]
    pub r_max: f64,
    #[serde(default = "scan_samples")]
    pub samples: usize,
    #[serde(default = "one")]
    pub cutoff: f64,
}

fn r_min_default() -> f64 {
    0.8
}

fn r_max_default() -> f64 {
    1.5
}

fn scan_samples() -> usize {
    141
}

/// Typed parameters of every kind.
#[derive(Debug, Clone)]
pub enum Params {
    StraightCrack(StraightCrackParams),
    PolygonalCrack(PolygonalParams),
    Staircase(StaircaseScenario),
    TriplePoint(TripleSpec),
    SurfaceRelaxation(RelaxationParams),
    Multilayer(MultilayerParams),
    MicrodeformedTriple(MicroScenario),
    HealingDemo(HealingParams),
    SmallDeformation(SmallScenario),
    Minimize(MinimizeScenario),
    Wulff(WulffScenario),
    GroundState(GroundStateScenario),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub epsilons: Vec<f64>,
    pub j_inf: f64,
    pub s_threshold: f64,
    pub margin: f64,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: SvgMode,
    pub domain: Option<DomainFile>,
    pub params: Params,
}

/// Parse and validate a scenario file before any computation.
pub fn load(text: &str) -> Result<Scenario> {
    #[derive(Deserialize)]
    struct Kinded {
        kind: Kind,
    }
    let table: toml::Table = toml::from_str(text)?;
    let kind = Kinded::deserialize(toml::Value::Table(table.clone())).map_err(|_| {
        anyhow::anyhow!(
            "unknown or missing scenario kind {}",
            table.get("kind").map_or("(none)".to_string(), |k| k.to_string())
        )
    })?;
    // Kinds whose parameters all have defaults may omit the table.
    let text = if table.contains_key("params") { text.to_string() } else { format!("{text}\n[params]\n") };
    fn typed<P: DeserializeOwned>(text: &str, wrap: fn(P) -> Params) -> Result<(File<()>, Params)> {
        let mut unknown = Vec::new();
        let f: File<P> =
            serde_ignored::deserialize(toml::Deserializer::new(text), |path| unknown.push(path.to_string()))?;
        if !unknown.is_empty() {
            bail!("unknown field(s): {}", unknown.join(", "));
        }
        let File { kind, epsilons, j_inf, s_threshold, margin, seed, out, svg, domain, params } = f;
        Ok((File { kind, epsilons, j_inf, s_threshold, margin, seed, out, svg, domain, params: () }, wrap(params)))
    }
    let (h, params) = match kind.kind {
        Kind::StraightCrack => typed(&text, Params::StraightCrack)?,
        Kind::PolygonalCrack => typed(&text, Params::PolygonalCrack)?,
        Kind::Staircase => typed(&text, Params::Staircase)?,
        Kind::TriplePoint => typed(&text, Params::TriplePoint)?,
        Kind::SurfaceRelaxation => typed(&text, Params::SurfaceRelaxation)?,
        Kind::Multilayer => typed(&text, Params::Multilayer)?,
        Kind::MicrodeformedTriple => typed(&text, Params::MicrodeformedTriple)?,
        Kind::HealingDemo => typed(&text, Params::HealingDemo)?,
        Kind::SmallDeformation => typed(&text, Params::SmallDeformation)?,
        Kind::Minimize => typed(&text, Params::Minimize)?,
        Kind::Wulff => typed(&text, Params::Wulff)?,
        Kind::GroundState => typed(&text, Params::GroundState)?,
    };
    let epsilons = h.epsilons.iter().map(Epsilon::value).collect::<Result<Vec<_>>>()?;
    let s = Scenario {
        kind: h.kind,
        epsilons,
        j_inf: h.j_inf,
        s_threshold: h.s_threshold,
        margin: h.margin,
        seed: h.seed,
        out: h.out,
        svg: h.svg,
        domain: h.domain,
        params,
    };
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_inf > 0.0 && self.j_inf.is_finite()) {
            bail!("j_inf must be positive");
        }
        if !(self.s_threshold > 0.0 && self.s_threshold < 1.0) {
            bail!("s_threshold must lie in (0, 1)");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            bail!("margin must be nonnegative");
        }
        if self.kind.needs_epsilons() && self.epsilons.is_empty() {
            bail!("scenario kind {:?} needs a nonempty epsilons list", self.kind);
        }
        if self.kind.needs_domain() {
            let d = self.domain.as_ref().context("this scenario kind needs a [domain] table with a polygon")?;
            if d.polygon.len() < 3 {
                bail!("domain polygon needs at least three vertices");
            }
        }
        match &self.params {
            Params::Staircase(p) => {
                if p.h.is_some_and(|h| !(h > 0.0)) || !(p.k > 0.0) {
                    bail!("staircase step must be positive");
                }
            }
            Params::MicrodeformedTriple(p) => {
                p.fixed()?;
            }
            Params::Minimize(p) => {
                if p.load_steps == 0 || p.stages == 0 {
                    bail!("load_steps and stages must be at least 1");
                }
            }
            Params::Wulff(p) if p.samples < 3 => bail!("wulff needs at least three samples"),
            _ => {}
        }
        Ok(())
    }
}
