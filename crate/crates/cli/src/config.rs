//! Experiment configuration: JSON schema and construction of grids,
//! functions and operators from it.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use mixnorm_core::expr::indexed_names;
use mixnorm_core::lab::{composition_norm_formula, multiplication_norm_formula};
use mixnorm_core::map::Layer;
use mixnorm_core::operators::{
    CompositionOperator, HardyOperator, IdentityOperator, MultiplicationOperator, OperatorI, ProductOperator, Route,
    SteklovOperator,
};
use mixnorm_core::{
    hardy_constant, Axis, DomainMask, ExponentVector, GeneralMap, GridFunction, GridOperator, KernelSet, PointMap,
    ProductGrid, ScalarFn, SteklovLimits, Strategy, TriangularMap,
};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Grid of the space the test function lives in.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Domain indicator over the grid labels; nonzero means inside.
    #[serde(default)]
    pub mask: Option<String>,
    /// Exponents of the output norm.
    pub p: Vec<f64>,
    /// Exponents of the input norm; defaults to `p`.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub function: Option<String>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub estimate: EstimateSpec,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

/// One axis, either a single segment (`b`, `m`, `graded`) or a list of
/// `segments` laid end to end from `a`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub a: f64,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub graded: Option<GradedSpec>,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    /// Density of the axis measure, in the axis label.
    #[serde(default)]
    pub weight: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub b: f64,
    pub m: usize,
    #[serde(default)]
    pub graded: Option<GradedSpec>,
}

/// Cells uniform in `ln(1 + |x - anchor| / scale)`; the anchor defaults to the segment start.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradedSpec {
    #[serde(default)]
    pub anchor: Option<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub forward: String,
    #[serde(default)]
    pub inverse: Option<String>,
    #[serde(default)]
    pub derivative: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSpec {
    /// Triangular layers `psi_i(x_1..x_i)`.
    #[serde(default)]
    pub layers: Option<Vec<LayerSpec>>,
    /// General map components in `x1..xn`.
    #[serde(default)]
    pub components: Option<Vec<String>>,
    /// Grid of the domain the composed function lives on.
    #[serde(default)]
    pub source: Option<GridSpec>,
    #[serde(default)]
    pub source_mask: Option<String>,
    #[serde(default)]
    pub densities: Option<DensitySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub kernels: Vec<String>,
    pub output: GridSpec,
    #[serde(default)]
    pub output_mask: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteklovSpec {
    pub lower: [String; 2],
    pub upper: [String; 2],
    #[serde(default)]
    pub kernels: Option<Vec<String>>,
    pub output: GridSpec,
    #[serde(default)]
    pub output_mask: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorISpec {
    pub layers: Vec<LayerSpec>,
    pub source: GridSpec,
    pub g: String,
    #[serde(default = "default_route")]
    pub route: Route,
}

fn default_route() -> Route {
    Route::Direct
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Identity,
    Composition(CompositionSpec),
    Hardy,
    Product(ProductSpec),
    Multiplication { g: String },
    Steklov(SteklovSpec),
    #[serde(rename = "operator_I", alias = "operator_i")]
    OperatorI(OperatorISpec),
}

impl OperatorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorSpec::Identity => "identity",
            OperatorSpec::Composition(_) => "composition",
            OperatorSpec::Hardy => "hardy",
            OperatorSpec::Product(_) => "product",
            OperatorSpec::Multiplication { .. } => "multiplication",
            OperatorSpec::Steklov(_) => "steklov",
            OperatorSpec::OperatorI(_) => "operator_I",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategy() -> Strategy {
    Strategy::Layered
}

fn default_budget() -> usize {
    256
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            strategy: default_strategy(),
            budget: default_budget(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub truncations: Vec<f64>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid configuration")
    }
}

fn names(labels: &[String]) -> Vec<&str> {
    labels.iter().map(String::as_str).collect()
}

fn expr(src: &str, vars: &[&str], what: &str) -> Result<ScalarFn> {
    ScalarFn::parse(src, vars).with_context(|| format!("in {what} {src:?}"))
}

impl AxisSpec {
    fn segments(&self) -> Result<Vec<SegmentSpec>> {
        match (&self.b, &self.m, self.segments.is_empty()) {
            (Some(b), Some(m), true) => Ok(vec![SegmentSpec {
                b: *b,
                m: *m,
                graded: self.graded,
            }]),
            (None, None, false) if self.graded.is_none() => Ok(self.segments.clone()),
            _ => bail!("an axis needs either `b` and `m`, or a list of `segments`"),
        }
    }

    fn cells(&self, factor: usize) -> Result<usize> {
        Ok(self.segments()?.iter().map(|s| s.m * factor).sum())
    }

    fn build(&self, default_label: &str, factor: usize) -> Result<Axis> {
        let label = self.label.clone().unwrap_or_else(|| default_label.to_string());
        let mut edges = vec![self.a];
        for seg in self.segments()? {
            let a = *edges.last().unwrap();
            let m = seg.m * factor;
            let piece = match seg.graded {
                None => Axis::uniform(&label, a, seg.b, m, |_| Ok(1.0)),
                Some(g) => Axis::log_graded(&label, a, seg.b, m, g.anchor.unwrap_or(a), g.scale, |_| Ok(1.0)),
            }
            .with_context(|| format!("axis {label}"))?;
            edges.extend_from_slice(&piece.edges()[1..]);
        }
        let density = match &self.weight {
            Some(src) => Some(expr(src, &[label.as_str()], "weight")?),
            None => None,
        };
        Axis::midpoint(&label, edges, |x| match &density {
            Some(w) => Ok(w.eval(&[x])?),
            None => Ok(1.0),
        })
        .with_context(|| format!("axis {label}"))
    }
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// No axis carries a density, so the measure is Lebesgue.
    pub fn unweighted(&self) -> bool {
        self.axes.iter().all(|a| a.weight.is_none())
    }

    pub fn nodes(&self, factor: usize) -> Result<usize> {
        self.axes
            .iter()
            .try_fold(1usize, |acc, a| Ok(acc.saturating_mul(a.cells(factor)?)))
    }

    fn build(&self, prefix: &str, factor: usize, max_nodes: usize) -> Result<Arc<ProductGrid>> {
        ensure!(!self.axes.is_empty(), "a grid needs at least one axis");
        let nodes = self.nodes(factor)?;
        ensure!(
            nodes <= max_nodes,
            "grid of {nodes} nodes exceeds the node budget of {max_nodes} (raise it with --max-nodes)"
        );
        let labels = indexed_names(prefix, self.dim());
        let axes = self
            .axes
            .iter()
            .zip(&labels)
            .map(|(a, l)| a.build(l, factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductGrid::shared(axes)?)
    }
}

fn mask_on(grid: &ProductGrid, src: Option<&str>, what: &str) -> Result<DomainMask> {
    match src {
        None => Ok(DomainMask::full(grid.shape())),
        Some(src) => {
            let labels: Vec<String> = grid.labels().iter().map(|s| s.to_string()).collect();
            let f = expr(src, &names(&labels), what)?;
            DomainMask::from_fn(grid, |x| Ok(f.eval(x)?)).with_context(|| format!("evaluating {what}"))
        }
    }
}

fn function_on(grid: &Arc<ProductGrid>, mask: &DomainMask, src: &str, what: &str) -> Result<GridFunction> {
    let labels: Vec<String> = grid.labels().iter().map(|s| s.to_string()).collect();
    let f = expr(src, &names(&labels), what)?;
    GridFunction::try_from_fn(grid.clone(), mask.clone(), |x| Ok(f.eval(x)?))
        .with_context(|| format!("evaluating {what}"))
}

fn layers(specs: &[LayerSpec]) -> Result<Vec<Layer>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Layer::parse(i, &l.forward, l.inverse.as_deref(), l.derivative.as_deref())
                .with_context(|| format!("in map layer {}", i + 1))
        })
        .collect()
}

fn triangular(specs: &[LayerSpec], densities: Option<&DensitySpec>, source: Arc<ProductGrid>) -> Result<TriangularMap> {
    let n = source.dim();
    ensure!(specs.len() == n, "{} map layers for a {n}-dimensional domain", specs.len());
    let mut map = TriangularMap::new(layers(specs)?, source)?;
    if let Some(d) = densities {
        ensure!(d.source.len() == n && d.target.len() == n, "one source and one target density per layer");
        let parse_all = |srcs: &[String], prefix: &str| -> Result<Vec<ScalarFn>> {
            srcs.iter()
                .enumerate()
                .map(|(i, s)| expr(s, &[format!("{prefix}{}", i + 1).as_str()], "density"))
                .collect()
        };
        map = map.with_densities(parse_all(&d.source, "x")?, parse_all(&d.target, "y")?)?;
    }
    Ok(map)
}

/// An operator built from the configuration, with its norm formula when one is known.
pub struct BuiltOperator {
    pub op: Box<dyn GridOperator>,
    pub formula: Option<f64>,
    /// Nodes of the output grid mapped outside the input domain (compositions only).
    pub uncovered: Option<usize>,
}

/// Configuration plus validated exponents; builds everything at a given refinement.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub p: ExponentVector,
    pub q: ExponentVector,
    pub max_nodes: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, max_nodes: usize) -> Result<Self> {
        let p = ExponentVector::new(config.p.clone()).context("exponents `p`")?;
        let q = ExponentVector::new(config.q.clone().unwrap_or_else(|| config.p.clone())).context("exponents `q`")?;
        ensure!(p.len() == q.len(), "`p` and `q` have different lengths");
        if let Some(g) = &config.grid {
            ensure!(g.dim() == p.len(), "{} exponents for a {}-dimensional grid", p.len(), g.dim());
        }
        Ok(Self {
            config,
            p,
            q,
            max_nodes,
        })
    }

    pub fn grid_spec(&self) -> Result<&GridSpec> {
        self.config.grid.as_ref().context("configuration has no `grid`")
    }

    /// Input grid and domain mask at refinement `factor`.
    pub fn domain(&self, factor: usize) -> Result<(Arc<ProductGrid>, DomainMask)> {
        let grid = self.grid_spec()?.build("y", factor, self.max_nodes)?;
        let mask = mask_on(&grid, self.config.mask.as_deref(), "mask")?;
        Ok((grid, mask))
    }

    pub fn function(&self, grid: &Arc<ProductGrid>, mask: &DomainMask) -> Result<GridFunction> {
        let src = self.config.function.as_deref().context("configuration has no `function`")?;
        function_on(grid, mask, src, "function")
    }

    /// Hardy and composition formulas are stated for Lebesgue measure; they are
    /// only attached when neither the input grid nor `other` is weighted.
    fn lebesgue(&self, other: Option<&GridSpec>) -> bool {
        self.config.grid.iter().chain(other).all(GridSpec::unweighted)
    }

    pub fn operator_spec(&self) -> Result<&OperatorSpec> {
        self.config.operator.as_ref().context("configuration has no `operator`")
    }

    /// The operator described by `spec` with input space `(grid, mask)`.
    pub fn operator(
        &self,
        spec: &OperatorSpec,
        grid: &Arc<ProductGrid>,
        mask: &DomainMask,
        factor: usize,
    ) -> Result<BuiltOperator> {
        let n = grid.dim();
        let same = self.p == self.q;
        let built = match spec {
            OperatorSpec::Identity => BuiltOperator {
                op: Box::new(IdentityOperator::new(grid.clone(), mask.clone())),
                formula: same.then_some(1.0),
                uncovered: None,
            },
            OperatorSpec::Hardy => {
                let formula = if same && self.lebesgue(None) {
                    hardy_constant(&self.p).ok()
                } else {
                    None
                };
                BuiltOperator {
                    op: Box::new(HardyOperator::new(grid.clone(), mask.clone())?),
                    formula,
                    uncovered: None,
                }
            }
            OperatorSpec::Multiplication { g } => {
                let g = function_on(grid, mask, g, "multiplier g")?;
                let formula = same.then(|| multiplication_norm_formula(&g));
                BuiltOperator {
                    op: Box::new(MultiplicationOperator::new(g)),
                    formula,
                    uncovered: None,
                }
            }
            OperatorSpec::Composition(c) => self.composition(c, grid, mask, factor)?,
            OperatorSpec::Product(s) => {
                ensure!(s.kernels.len() == n, "{} kernels for a {n}-dimensional input", s.kernels.len());
                let out = s.output.build("x", factor, self.max_nodes)?;
                let out_mask = mask_on(&out, s.output_mask.as_deref(), "output mask")?;
                let kernels = KernelSet::parse(&s.kernels).context("in kernels")?;
                BuiltOperator {
                    op: Box::new(ProductOperator::new(kernels, grid.clone(), mask.clone(), out, out_mask)),
                    formula: None,
                    uncovered: None,
                }
            }
            OperatorSpec::Steklov(s) => {
                ensure!(n == 2, "the Hardy-Steklov operator is two-dimensional");
                let limits = SteklovLimits::parse([&s.lower[0], &s.lower[1]], [&s.upper[0], &s.upper[1]])
                    .context("in Steklov limits")?;
                let kernels = match &s.kernels {
                    Some(k) => {
                        ensure!(k.len() == 2, "the Hardy-Steklov operator takes two kernels");
                        KernelSet::parse(k).context("in kernels")?
                    }
                    None => KernelSet::ones(2),
                };
                let out = s.output.build("x", factor, self.max_nodes)?;
                let out_mask = mask_on(&out, s.output_mask.as_deref(), "output mask")?;
                BuiltOperator {
                    op: Box::new(SteklovOperator::new(limits, kernels, grid.clone(), mask.clone(), out, out_mask)),
                    formula: None,
                    uncovered: None,
                }
            }
            OperatorSpec::OperatorI(s) => {
                let source = s.source.build("x", factor, self.max_nodes)?;
                let map = triangular(&s.layers, None, source)?;
                let g = function_on(grid, mask, &s.g, "multiplier g")?;
                BuiltOperator {
                    op: Box::new(OperatorI::new(map, g, s.route)?),
                    formula: None,
                    uncovered: None,
                }
            }
        };
        Ok(built)
    }

    fn composition(
        &self,
        c: &CompositionSpec,
        grid: &Arc<ProductGrid>,
        mask: &DomainMask,
        factor: usize,
    ) -> Result<BuiltOperator> {
        let n = grid.dim();
        let source = match &c.source {
            Some(s) => s.build("x", factor, self.max_nodes)?,
            None => grid.clone(),
        };
        ensure!(source.dim() == n, "source grid and input grid dimensions differ");
        let source_mask = mask_on(&source, c.source_mask.as_deref(), "source mask")?;
        let built = match (&c.layers, &c.components) {
            (Some(l), None) => {
                let map = triangular(l, c.densities.as_ref(), source.clone())?;
                let target_mask = map.image_mask(grid)?.intersect(mask)?;
                let formula = if self.p == self.q && self.lebesgue(c.source.as_ref()) {
                    Some(composition_norm_formula(&map, &self.p, grid, &target_mask)?)
                } else {
                    None
                };
                let op = CompositionOperator::new(&map, source, source_mask, grid.clone(), target_mask)?;
                let uncovered = op.plan().coverage().uncovered;
                BuiltOperator {
                    op: Box::new(op),
                    formula,
                    uncovered: Some(uncovered),
                }
            }
            (None, Some(comp)) => {
                ensure!(comp.len() == n, "{} map components for a {n}-dimensional domain", comp.len());
                ensure!(c.densities.is_none(), "densities apply to triangular maps only");
                let xs = indexed_names("x", n);
                let comps = comp
                    .iter()
                    .map(|s| expr(s, &names(&xs), "map component"))
                    .collect::<Result<Vec<_>>>()?;
                let map = GeneralMap::new(comps);
                let op = CompositionOperator::new(&map as &dyn PointMap, source, source_mask, grid.clone(), mask.clone())?;
                let uncovered = op.plan().coverage().uncovered;
                BuiltOperator {
                    op: Box::new(op),
                    formula: None,
                    uncovered: Some(uncovered),
                }
            }
            _ => bail!("a composition needs exactly one of `layers` and `components`"),
        };
        Ok(built)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(json: &str) -> Result<Experiment> {
        Experiment::new(ExperimentConfig::from_json(json)?, 1_000_000)
    }

    #[test]
    fn operator_kinds_parse() {
        for (json, kind) in [
            (r#"{"kind": "hardy"}"#, "hardy"),
            (r#"{"kind": "identity"}"#, "identity"),
            (r#"{"kind": "multiplication", "g": "y1"}"#, "multiplication"),
            (r#"{"kind": "operator_i", "layers": [{"forward": "x1"}], "source": {"axes": [{"a": 0, "b": 1, "m": 2}]}, "g": "1"}"#, "operator_I"),
        ] {
            let spec: OperatorSpec = serde_json::from_str(json).unwrap();
            assert_eq!(spec.kind(), kind);
        }
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind": "fourier"}"#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"p": [2], "gird": {}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("gird"));
    }

    #[test]
    fn segments_concatenate() {
        let exp = experiment(
            r#"{"p": [2], "grid": {"axes": [{"a": 0, "segments": [{"b": 1, "m": 4}, {"b": 100, "m": 6, "graded": {"scale": 0.1}}]}]}}"#,
        )
        .unwrap();
        let (grid, _) = exp.domain(2).unwrap();
        let edges = grid.axis(0).edges();
        assert_eq!(edges.len(), 21);
        assert_eq!(edges[8], 1.0);
        assert_eq!(*edges.last().unwrap(), 100.0);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exponent_lengths_must_match_the_grid() {
        assert!(experiment(r#"{"p": [2, 3], "grid": {"axes": [{"a": 0, "b": 1, "m": 4}]}}"#).is_err());
        assert!(experiment(r#"{"p": [2], "q": [2, 2]}"#).is_err());
        assert!(experiment(r#"{"p": [0.5]}"#).is_err());
    }

    #[test]
    fn node_budget_is_enforced() {
        let exp = experiment(r#"{"p": [2, 2], "grid": {"axes": [{"a": 0, "b": 1, "m": 2000}, {"a": 0, "b": 1, "m": 2000}]}}"#)
            .unwrap();
        let err = exp.domain(1).unwrap_err();
        assert!(format!("{err:#}").contains("node budget"));
    }

    #[test]
    fn formulas_need_lebesgue_axes() {
        let plain = experiment(r#"{"p": [2], "grid": {"axes": [{"a": 0, "b": 1, "m": 8}]}}"#).unwrap();
        let weighted = experiment(r#"{"p": [2], "grid": {"axes": [{"a": 0, "b": 1, "m": 8, "weight": "1 + y1"}]}}"#).unwrap();
        for (exp, want) in [(plain, Some(2.0)), (weighted, None)] {
            let (grid, mask) = exp.domain(1).unwrap();
            let built = exp.operator(&OperatorSpec::Hardy, &grid, &mask, 1).unwrap();
            assert_eq!(built.formula, want);
        }
    }
}
