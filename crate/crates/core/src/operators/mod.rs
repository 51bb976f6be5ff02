//! Linear operators on grid functions: composition, Hardy averaging, kernel
//! product operators, multiplication, Hardy-Steklov and the composite `I`.

mod hardy;
mod kernel;
mod operator_i;
mod steklov;

use std::sync::Arc;

pub use hardy::{hardy_apply, hardy_constant, CumulativeTable};
pub use kernel::{partial_apply, product_apply, Kernel, KernelSet};
pub use operator_i::{operator_i_apply, Route};
pub use steklov::{steklov_apply, SteklovLimits};

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridFunction, ProductGrid};
use crate::map::{PointMap, PullbackPlan, TriangularMap};

/// `(M_g f)(x) = f(x) g(x)`.
pub fn multiplication_apply(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.zip_with(g, |a, b| a * b)
}

/// A linear operator with a fixed input space.
pub trait GridOperator: Send + Sync {
    fn name(&self) -> String;

    /// Grid and mask of the input space.
    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask);

    fn apply(&self, f: &GridFunction) -> Result<GridFunction>;
}

fn check_input(op: &dyn GridOperator, f: &GridFunction) -> Result<()> {
    let (grid, _) = op.domain();
    if !f.grid().same_geometry(grid) {
        return Err(Error::Shape(format!("input does not live on the domain grid of {}", op.name())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IdentityOperator {
    grid: Arc<ProductGrid>,
    mask: DomainMask,
}

impl IdentityOperator {
    pub fn new(grid: Arc<ProductGrid>, mask: DomainMask) -> Self {
        Self { grid, mask }
    }
}

impl GridOperator for IdentityOperator {
    fn name(&self) -> String {
        "identity".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (&self.grid, &self.mask)
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        check_input(self, f)?;
        Ok(f.clone())
    }
}

/// `C_phi f = f o phi`, from `L(Omega')` to `L(Omega)`.
#[derive(Debug, Clone)]
pub struct CompositionOperator {
    plan: PullbackPlan,
    target_mask: DomainMask,
}

impl CompositionOperator {
    pub fn new(
        map: &dyn PointMap,
        source: Arc<ProductGrid>,
        source_mask: DomainMask,
        target: Arc<ProductGrid>,
        target_mask: DomainMask,
    ) -> Result<Self> {
        let plan = PullbackPlan::new(map, source, source_mask, target, &target_mask)?;
        Ok(Self { plan, target_mask })
    }

    /// Source box of a triangular map, with its image as the target domain.
    pub fn triangular(map: &TriangularMap, target: Arc<ProductGrid>) -> Result<Self> {
        let mask = map.image_mask(&target)?;
        let source = map.source().clone();
        let full = DomainMask::full(source.shape());
        Self::new(map, source, full, target, mask)
    }

    pub fn plan(&self) -> &PullbackPlan {
        &self.plan
    }
}

impl GridOperator for CompositionOperator {
    fn name(&self) -> String {
        "composition".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (self.plan.target(), &self.target_mask)
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.plan.apply(f)
    }
}

#[derive(Debug, Clone)]
pub struct HardyOperator {
    grid: Arc<ProductGrid>,
    mask: DomainMask,
}

impl HardyOperator {
    pub fn new(grid: Arc<ProductGrid>, mask: DomainMask) -> Result<Self> {
        hardy::check_anchored(&grid, "the Hardy operator")?;
        Ok(Self { grid, mask })
    }
}

impl GridOperator for HardyOperator {
    fn name(&self) -> String {
        format!("hardy_{}", self.grid.dim())
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (&self.grid, &self.mask)
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        check_input(self, f)?;
        hardy_apply(f)
    }
}

#[derive(Debug, Clone)]
pub struct ProductOperator {
    kernels: KernelSet,
    input: Arc<ProductGrid>,
    input_mask: DomainMask,
    output: Arc<ProductGrid>,
    output_mask: DomainMask,
}

impl ProductOperator {
    pub fn new(
        kernels: KernelSet,
        input: Arc<ProductGrid>,
        input_mask: DomainMask,
        output: Arc<ProductGrid>,
        output_mask: DomainMask,
    ) -> Self {
        Self {
            kernels,
            input,
            input_mask,
            output,
            output_mask,
        }
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn output(&self) -> &Arc<ProductGrid> {
        &self.output
    }
}

impl GridOperator for ProductOperator {
    fn name(&self) -> String {
        "product".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (&self.input, &self.input_mask)
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        check_input(self, f)?;
        product_apply(&self.kernels, f, &self.output, &self.output_mask)
    }
}

#[derive(Debug, Clone)]
pub struct MultiplicationOperator {
    g: GridFunction,
}

impl MultiplicationOperator {
    pub fn new(g: GridFunction) -> Self {
        Self { g }
    }

    pub fn multiplier(&self) -> &GridFunction {
        &self.g
    }
}

impl GridOperator for MultiplicationOperator {
    fn name(&self) -> String {
        "multiplication".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (self.g.grid(), self.g.mask())
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        multiplication_apply(f, &self.g)
    }
}

#[derive(Debug, Clone)]
pub struct SteklovOperator {
    limits: SteklovLimits,
    kernels: KernelSet,
    input: Arc<ProductGrid>,
    input_mask: DomainMask,
    output: Arc<ProductGrid>,
    output_mask: DomainMask,
}

impl SteklovOperator {
    pub fn new(
        limits: SteklovLimits,
        kernels: KernelSet,
        input: Arc<ProductGrid>,
        input_mask: DomainMask,
        output: Arc<ProductGrid>,
        output_mask: DomainMask,
    ) -> Self {
        Self {
            limits,
            kernels,
            input,
            input_mask,
            output,
            output_mask,
        }
    }
}

impl GridOperator for SteklovOperator {
    fn name(&self) -> String {
        "steklov".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (&self.input, &self.input_mask)
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        check_input(self, f)?;
        steklov_apply(&self.limits, &self.kernels, f, &self.output, &self.output_mask)
    }
}

/// `I = C_phi H_n M_g`.
#[derive(Debug, Clone)]
pub struct OperatorI {
    map: TriangularMap,
    g: GridFunction,
    route: Route,
}

impl OperatorI {
    pub fn new(map: TriangularMap, g: GridFunction, route: Route) -> Result<Self> {
        hardy::check_anchored(g.grid(), "operator I")?;
        Ok(Self { map, g, route })
    }

    pub fn map(&self) -> &TriangularMap {
        &self.map
    }

    pub fn multiplier(&self) -> &GridFunction {
        &self.g
    }
}

impl GridOperator for OperatorI {
    fn name(&self) -> String {
        "operator_i".into()
    }

    fn domain(&self) -> (&Arc<ProductGrid>, &DomainMask) {
        (self.g.grid(), self.g.mask())
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        operator_i_apply(&self.map, &self.g, f, self.route)
    }
}
