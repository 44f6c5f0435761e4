//! Convergence-rate harness: h-refinement EOC tables, eps sweeps for
//! uniformity, N sweeps for angular decay, and the moment-scaling probe.
//!
//! A study couples one oracle (an exact solution and the forcing that
//! produces it) with a refinement path. Per mesh level it assembles,
//! solves, and measures errors of the discrete field against the oracle at
//! quadrature points one order finer than assembly, then reports the
//! experimental orders of convergence between adjacent levels.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{assemble, jump_penalty_sq, CrossSection, MaterialField, MomentField};
use crate::basis::LocalBasis;
use crate::error::{Error, Result};
use crate::geometry::PeriodicCartesianMesh;
use crate::harmonics::{moment_matrices, sphere_quadrature, MomentBasis, MomentMatrices};
use crate::reference::{
    kinetic_fourier_solve, manufactured_forcing, pn_fourier_solve, FourierForcing,
    IsotropicForcing, ManufacturedSolution,
};
use crate::solver::{solve, SolverConfig};

/// Quadrature order for kinetic-oracle angular integrals.
const KINETIC_QUADRATURE: usize = 40;

/// Cross sections of a study, constant or spatially varying.
#[derive(Clone)]
pub enum MaterialSpec {
    /// Constant cross sections.
    Constant {
        /// Total cross section.
        sigma_t: f64,
        /// Absorption cross section.
        sigma_a: f64,
    },
    /// Spatially varying cross sections.
    Variable {
        /// Total cross section.
        sigma_t: CrossSection,
        /// Absorption cross section.
        sigma_a: CrossSection,
    },
}

impl std::fmt::Debug for MaterialSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaterialSpec::Constant { sigma_t, sigma_a } => f
                .debug_struct("Constant")
                .field("sigma_t", sigma_t)
                .field("sigma_a", sigma_a)
                .finish(),
            MaterialSpec::Variable { .. } => f.debug_struct("Variable").finish_non_exhaustive(),
        }
    }
}

impl MaterialSpec {
    /// Materialises the cross sections at one scaling parameter.
    pub fn at_eps(&self, eps: f64) -> Result<MaterialField> {
        match self {
            MaterialSpec::Constant { sigma_t, sigma_a } => {
                MaterialField::constant(*sigma_t, *sigma_a, eps)
            }
            MaterialSpec::Variable { sigma_t, sigma_a } => {
                let st = sigma_t.clone();
                let sa = sigma_a.clone();
                MaterialField::variable(move |x| st(x), move |x| sa(x), eps)
            }
        }
    }

    /// True for the constant variant.
    pub fn is_constant(&self) -> bool {
        matches!(self, MaterialSpec::Constant { .. })
    }
}

/// The exact solution a study measures errors against.
#[derive(Debug, Clone)]
pub enum Oracle {
    /// Exact moment solution per Fourier mode; constant materials only.
    PnFourier(FourierForcing),
    /// Exact kinetic moments per Fourier mode; constant materials only.
    /// Errors then include the closure error, which dominates under
    /// refinement.
    Kinetic(IsotropicForcing),
    /// Prescribed smooth field with the forcing manufactured from it;
    /// works for variable materials.
    Manufactured(ManufacturedSolution),
}

impl Oracle {
    fn name(&self) -> &'static str {
        match self {
            Oracle::PnFourier(_) => "pn-fourier",
            Oracle::Kinetic(_) => "kinetic",
            Oracle::Manufactured(_) => "manufactured",
        }
    }
}

/// One convergence study: a refinement path times an eps sweep.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Moment order `N`.
    pub order: usize,
    /// Local polynomial degree `k`.
    pub degree: usize,
    /// Cells per axis of each refinement level, strictly increasing.
    pub cells: Vec<usize>,
    /// Scaling parameters to sweep, each in `(0, 1]`.
    pub eps_values: Vec<f64>,
    /// Cross sections.
    pub materials: MaterialSpec,
    /// Exact solution and forcing.
    pub oracle: Oracle,
    /// Linear solver settings.
    pub solver: SolverConfig,
}

impl StudyConfig {
    /// Checks the config invariants and oracle applicability.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::config(format!(
                "dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.cells.is_empty() {
            return Err(Error::config("mesh sequence is empty"));
        }
        if self.cells.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(format!(
                "mesh sequence must be strictly refining, got {:?}",
                self.cells
            )));
        }
        if self.eps_values.is_empty() {
            return Err(Error::config("eps list is empty"));
        }
        for &eps in &self.eps_values {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::config(format!(
                    "requires eps in (0, 1], got {eps}"
                )));
            }
        }
        let l = MomentBasis::new(self.order).len();
        match &self.oracle {
            Oracle::PnFourier(forcing) => {
                if !self.materials.is_constant() {
                    return Err(Error::config(
                        "the pn-fourier oracle requires constant cross sections",
                    ));
                }
                if forcing.dim() != self.dim {
                    return Err(Error::config(format!(
                        "forcing dimension {} does not match study dimension {}",
                        forcing.dim(),
                        self.dim
                    )));
                }
                if forcing.n_moments() != l {
                    return Err(Error::config(format!(
                        "forcing has {} moments but order {} needs {}",
                        forcing.n_moments(),
                        self.order,
                        l
                    )));
                }
            }
            Oracle::Kinetic(forcing) => {
                if !self.materials.is_constant() {
                    return Err(Error::config(
                        "the kinetic oracle requires constant cross sections",
                    ));
                }
                if forcing.dim() != self.dim {
                    return Err(Error::config(format!(
                        "forcing dimension {} does not match study dimension {}",
                        forcing.dim(),
                        self.dim
                    )));
                }
            }
            Oracle::Manufactured(solution) => {
                if solution.n_moments() != l {
                    return Err(Error::config(format!(
                        "solution has {} moments but order {} needs {}",
                        solution.n_moments(),
                        self.order,
                        l
                    )));
                }
            }
        }
        self.solver.validate()
    }
}

/// Errors of one solve in the three norms the estimates are stated in.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorNorms {
    /// Plain `L^2` error.
    pub l2: f64,
    /// `Q`-weighted error.
    pub q: f64,
    /// Triple-norm error (the `Q` part plus the jump penalty).
    pub triple: f64,
}

/// One (h, eps) cell of a study.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    /// Spatial dimension.
    pub dim: usize,
    /// Moment order `N`.
    pub order: usize,
    /// Local polynomial degree `k`.
    pub degree: usize,
    /// Scaling parameter.
    pub eps: f64,
    /// Cells per axis.
    pub cells: usize,
    /// Mesh width.
    pub h: f64,
    /// Errors against the oracle.
    pub errors: ErrorNorms,
    /// `L^2` EOC against the previous level at the same eps, if defined.
    pub eoc_l2: Option<f64>,
    /// Wall-clock time of assemble + solve, in milliseconds.
    pub wall_ms: u64,
}

/// Result table of [`run_convergence`], eps-major then h.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    /// All runs in execution order.
    pub runs: Vec<RunRecord>,
}

impl ErrorReport {
    /// The records of one eps value in refinement order.
    pub fn at_eps(&self, eps: f64) -> Vec<&RunRecord> {
        self.runs.iter().filter(|r| r.eps == eps).collect()
    }

    /// The EOC of the finest mesh pair at one eps value.
    pub fn terminal_eoc(&self, eps: f64) -> Option<f64> {
        self.at_eps(eps).last().and_then(|r| r.eoc_l2)
    }
}

/// Experimental orders of convergence between adjacent refinement levels,
/// `rate_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
///
/// A nonpositive error in a pair yields `None` for that rate rather than
/// an error.
pub fn eoc(h: &[f64], e: &[f64]) -> Result<Vec<Option<f64>>> {
    if h.len() != e.len() {
        return Err(Error::invalid(format!(
            "mesh and error lists differ in length: {} vs {}",
            h.len(),
            e.len()
        )));
    }
    if h.len() < 2 {
        return Err(Error::invalid("at least two levels are needed for a rate"));
    }
    if h.iter().any(|&hi| hi <= 0.0) {
        return Err(Error::invalid("mesh widths must be positive"));
    }
    if h.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("adjacent mesh widths must differ"));
    }
    Ok(h.windows(2)
        .zip(e.windows(2))
        .map(|(hw, ew)| {
            if ew[0] > 0.0 && ew[1] > 0.0 {
                Some((ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
            } else {
                None
            }
        })
        .collect())
}

/// Measures errors of a discrete field against an exact moment solution.
///
/// The exact solution is evaluated directly at the quadrature nodes of a
/// rule one order finer than assembly (`k + 3` points per axis), not
/// projected, so the measurement does not inherit the assembly rule's
/// blind spots. The jump part of the triple norm comes from the discrete
/// field alone since the exact solution is continuous.
pub fn measure_errors(
    field: &MomentField,
    exact: &dyn Fn(&[f64; 2]) -> Vec<f64>,
    materials: &MaterialField,
    matrices: &MomentMatrices,
) -> Result<ErrorNorms> {
    let mesh = field.mesh();
    let dim = mesh.dim();
    let l = field.n_moments();
    if matrices.basis().len() != l {
        return Err(Error::invalid(format!(
            "matrices have L = {}, field has L = {}",
            matrices.basis().len(),
            l
        )));
    }
    let fine = LocalBasis::with_points(dim, field.basis().degree(), field.basis().degree() + 3)?;
    let basis_at_fine: Vec<Vec<f64>> = fine
        .quad_nodes()
        .iter()
        .map(|xi| field.basis().eval_point(xi))
        .collect();
    let scale = field.physical_scale();
    let n_local = field.basis().n_local();
    let volume = mesh.element_volume() / (1 << dim) as f64;

    let mut l2_sq = 0.0;
    let mut q_sq = 0.0;
    for e in 0..mesh.n_elements() {
        let coeffs = field.element_coeffs(e);
        for (qi, xi) in fine.quad_nodes().iter().enumerate() {
            let x = mesh.map_to_physical(e, xi);
            let reference = exact(&x);
            if reference.len() != l {
                return Err(Error::invalid(format!(
                    "exact solution returned {} moments, expected {l}",
                    reference.len()
                )));
            }
            let w = fine.quad_weights()[qi] * volume;
            let q_first = materials.q_first(&x);
            let q_rest = materials.q_rest(&x);
            let phi = &basis_at_fine[qi];
            for (m, u_exact) in reference.iter().enumerate() {
                let row = &coeffs[m * n_local..(m + 1) * n_local];
                let u_h = scale * row.iter().zip(phi).map(|(c, p)| c * p).sum::<f64>();
                let diff = u_h - u_exact;
                let weight = if m == 0 { q_first } else { q_rest };
                l2_sq += w * diff * diff;
                q_sq += w * weight * diff * diff;
            }
        }
    }
    let jump_sq = jump_penalty_sq(field, matrices)?;
    Ok(ErrorNorms {
        l2: l2_sq.sqrt(),
        q: q_sq.sqrt(),
        triple: (q_sq + jump_sq).sqrt(),
    })
}

/// The oracle pieces of one eps value: the forcing to assemble with and
/// the exact solution to measure against.
type FieldFn = Box<dyn Fn(&[f64; 2]) -> Vec<f64>>;

struct OracleInstance {
    forcing: FieldFn,
    exact: FieldFn,
}

fn instantiate_oracle(
    oracle: &Oracle,
    matrices: &MomentMatrices,
    materials: &MaterialField,
    dim: usize,
) -> Result<OracleInstance> {
    let l = matrices.basis().len();
    match oracle {
        Oracle::PnFourier(forcing) => {
            let reference = pn_fourier_solve(matrices, materials, forcing)?;
            let forcing = forcing.clone();
            Ok(OracleInstance {
                forcing: Box::new(move |x| forcing.evaluate(x)),
                exact: Box::new(move |x| reference.evaluate(x)),
            })
        }
        Oracle::Kinetic(forcing) => {
            let quadrature = sphere_quadrature(KINETIC_QUADRATURE)?;
            let kinetic =
                kinetic_fourier_solve(matrices.basis(), materials, forcing, &quadrature)?;
            let moment_forcing = forcing.moment_forcing(l)?;
            Ok(OracleInstance {
                forcing: Box::new(move |x| moment_forcing.evaluate(x)),
                exact: Box::new(move |x| kinetic.moments().evaluate(x)),
            })
        }
        Oracle::Manufactured(solution) => {
            let forcing = manufactured_forcing(solution, materials, matrices, dim)?;
            let solution = solution.clone();
            Ok(OracleInstance {
                forcing: Box::new(forcing),
                exact: Box::new(move |x| solution.value(x)),
            })
        }
    }
}

/// Runs the full refinement-times-eps study.
///
/// Records appear eps-major, each eps in refinement order, with the `L^2`
/// EOC filled in from the second level on. Failures are annotated with the
/// (h, eps) cell they occurred in.
pub fn run_convergence(config: &StudyConfig) -> Result<ErrorReport> {
    config.validate()?;
    let basis = LocalBasis::new(config.dim, config.degree)?;
    let moment_basis = MomentBasis::new(config.order);
    let matrices = moment_matrices(&moment_basis)?;

    let mut runs = Vec::new();
    for &eps in &config.eps_values {
        let materials = config.materials.at_eps(eps)?;
        let oracle = instantiate_oracle(&config.oracle, &matrices, &materials, config.dim)?;
        let mut previous: Option<(f64, f64)> = None;
        for &cells in &config.cells {
            let context = format!(
                "{} study at h = 1/{cells}, eps = {eps}",
                config.oracle.name()
            );
            let per_axis = vec![cells; config.dim];
            let mesh = PeriodicCartesianMesh::new(config.dim, &per_axis)
                .map_err(|e| e.annotate(&context))?;
            let start = Instant::now();
            let system = assemble(&mesh, &basis, &matrices, &materials, &oracle.forcing)
                .map_err(|e| e.annotate(&context))?;
            let field = solve(&system, &config.solver).map_err(|e| e.annotate(&context))?;
            let wall_ms = start.elapsed().as_millis() as u64;
            let errors = measure_errors(&field, &oracle.exact, &materials, &matrices)
                .map_err(|e| e.annotate(&context))?;

            let h = mesh.h_max();
            let eoc_l2 = previous.and_then(|(h_prev, e_prev)| {
                if e_prev > 0.0 && errors.l2 > 0.0 {
                    Some((e_prev / errors.l2).ln() / (h_prev / h).ln())
                } else {
                    None
                }
            });
            previous = Some((h, errors.l2));
            runs.push(RunRecord {
                dim: config.dim,
                order: config.order,
                degree: config.degree,
                eps,
                cells,
                h,
                errors,
                eoc_l2,
                wall_ms,
            });
        }
    }
    Ok(ErrorReport { runs })
}

/// One eps value of the moment-scaling probe.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRecord {
    /// Scaling parameter.
    pub eps: f64,
    /// `L^2` norm of the zeroth discrete moment.
    pub first: f64,
    /// Largest `L^2` norm among the higher discrete moments, divided by
    /// eps.
    pub rest_over_eps: f64,
}

/// Solves on the first mesh level per eps and reports the moment norms
/// whose eps-uniform boundedness the a-priori estimates assert.
pub fn moment_scaling_probe(config: &StudyConfig) -> Result<Vec<ScalingRecord>> {
    config.validate()?;
    let basis = LocalBasis::new(config.dim, config.degree)?;
    let moment_basis = MomentBasis::new(config.order);
    let matrices = moment_matrices(&moment_basis)?;
    let cells = config.cells[0];
    let per_axis = vec![cells; config.dim];
    let mesh = PeriodicCartesianMesh::new(config.dim, &per_axis)?;
    let l = moment_basis.len();

    let mut records = Vec::new();
    for &eps in &config.eps_values {
        let context = format!("scaling probe at h = 1/{cells}, eps = {eps}");
        let materials = config.materials.at_eps(eps)?;
        let oracle = instantiate_oracle(&config.oracle, &matrices, &materials, config.dim)?;
        let system = assemble(&mesh, &basis, &matrices, &materials, &oracle.forcing)
            .map_err(|e| e.annotate(&context))?;
        let field = solve(&system, &config.solver).map_err(|e| e.annotate(&context))?;
        let first = field.moment_l2_norm(0);
        let rest = (1..l)
            .map(|m| field.moment_l2_norm(m))
            .fold(0.0f64, f64::max);
        records.push(ScalingRecord {
            eps,
            first,
            rest_over_eps: rest / eps,
        });
    }
    Ok(records)
}

/// One moment order of the angular-decay sweep.
#[derive(Debug, Clone, Serialize)]
pub struct NSweepRecord {
    /// Moment order `N`.
    pub order: usize,
    /// Modal distance between the exact kinetic moments and the exact
    /// moment solution at this order.
    pub moment_error: f64,
}

/// Configuration of [`run_n_sweep`].
#[derive(Debug, Clone)]
pub struct NSweepConfig {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Moment orders to sweep.
    pub orders: Vec<usize>,
    /// Total cross section.
    pub sigma_t: f64,
    /// Absorption cross section.
    pub sigma_a: f64,
    /// Scaling parameter.
    pub eps: f64,
    /// Isotropic kinetic forcing.
    pub forcing: IsotropicForcing,
}

/// Sweeps the moment order and reports the closure error against the
/// exact kinetic solution, which decays as the order grows for smooth
/// data.
pub fn run_n_sweep(config: &NSweepConfig) -> Result<Vec<NSweepRecord>> {
    if config.orders.is_empty() {
        return Err(Error::config("order list is empty"));
    }
    if config.forcing.dim() != config.dim {
        return Err(Error::config(format!(
            "forcing dimension {} does not match sweep dimension {}",
            config.forcing.dim(),
            config.dim
        )));
    }
    let materials = MaterialField::constant(config.sigma_t, config.sigma_a, config.eps)?;
    let quadrature = sphere_quadrature(KINETIC_QUADRATURE)?;
    let mut records = Vec::new();
    for &order in &config.orders {
        let basis = MomentBasis::new(order);
        let matrices = moment_matrices(&basis)?;
        let kinetic = kinetic_fourier_solve(&basis, &materials, &config.forcing, &quadrature)?;
        let pn = pn_fourier_solve(
            &matrices,
            &materials,
            &config.forcing.moment_forcing(basis.len())?,
        )?;
        let moment_error = kinetic
            .moments()
            .modes()
            .map(|(kappa, km)| {
                let pm = pn
                    .mode(&kappa[..config.dim])
                    .map(|pm| {
                        km.iter()
                            .zip(pm)
                            .map(|(a, b)| (a - b).norm_sqr())
                            .sum::<f64>()
                    })
                    .unwrap_or_else(|| km.iter().map(|a| a.norm_sqr()).sum());
                pm
            })
            .sum::<f64>()
            .sqrt();
        records.push(NSweepRecord {
            order,
            moment_error,
        });
    }
    Ok(records)
}

/// A fixed smooth eps-independent Fourier forcing used by the command-line
/// studies and the acceptance runs: a mean source plus one oscillatory
/// mode with slowly decaying moment amplitudes.
pub fn smooth_fourier_forcing(dim: usize, n_moments: usize) -> Result<FourierForcing> {
    use num_complex::Complex64;
    let mut forcing = FourierForcing::new(dim, n_moments)?;
    let mean: Vec<Complex64> = (0..n_moments)
        .map(|m| Complex64::new(1.0 / (1.0 + m as f64), 0.0))
        .collect();
    let wave: Vec<Complex64> = (0..n_moments)
        .map(|m| Complex64::new(0.8 / (1.0 + m as f64), -0.4 / (2.0 + m as f64)))
        .collect();
    if dim == 1 {
        forcing.add_mode(&[0], mean)?;
        forcing.add_mode(&[1], wave)?;
    } else {
        forcing.add_mode(&[0, 0], mean)?;
        forcing.add_mode(&[1, 1], wave)?;
    }
    Ok(forcing)
}

/// A fixed smooth isotropic forcing for kinetic-oracle runs.
pub fn smooth_isotropic_forcing(dim: usize) -> Result<IsotropicForcing> {
    use num_complex::Complex64;
    let mut forcing = IsotropicForcing::new(dim)?;
    if dim == 1 {
        forcing.add_mode(&[0], Complex64::new(1.0, 0.0))?;
        forcing.add_mode(&[1], Complex64::new(0.6, -0.3))?;
    } else {
        forcing.add_mode(&[0, 0], Complex64::new(1.0, 0.0))?;
        forcing.add_mode(&[1, 0], Complex64::new(0.6, -0.3))?;
    }
    Ok(forcing)
}

/// A fixed smooth periodic moment field for manufactured studies: one
/// trigonometric wave per moment with decaying amplitude and shifted
/// phase.
pub fn smooth_manufactured_solution(
    dim: usize,
    n_moments: usize,
) -> Result<ManufacturedSolution> {
    use std::f64::consts::PI;
    let amplitude = |m: usize| 1.0 / ((1 + m) * (1 + m)) as f64;
    let phase = |m: usize| 0.3 * m as f64;
    if dim == 1 {
        ManufacturedSolution::new(
            n_moments,
            move |x| {
                (0..n_moments)
                    .map(|m| amplitude(m) * (2.0 * PI * x[0] + phase(m)).sin())
                    .collect()
            },
            move |x, axis| {
                if axis == 0 {
                    (0..n_moments)
                        .map(|m| amplitude(m) * 2.0 * PI * (2.0 * PI * x[0] + phase(m)).cos())
                        .collect()
                } else {
                    vec![0.0; n_moments]
                }
            },
        )
    } else {
        ManufacturedSolution::new(
            n_moments,
            move |x| {
                (0..n_moments)
                    .map(|m| {
                        amplitude(m)
                            * (2.0 * PI * x[0] + phase(m)).sin()
                            * (2.0 * PI * x[1] - phase(m)).cos()
                    })
                    .collect()
            },
            move |x, axis| {
                (0..n_moments)
                    .map(|m| {
                        if axis == 0 {
                            amplitude(m)
                                * 2.0
                                * PI
                                * (2.0 * PI * x[0] + phase(m)).cos()
                                * (2.0 * PI * x[1] - phase(m)).cos()
                        } else {
                            -amplitude(m)
                                * 2.0
                                * PI
                                * (2.0 * PI * x[0] + phase(m)).sin()
                                * (2.0 * PI * x[1] - phase(m)).sin()
                        }
                    })
                    .collect()
            },
        )
    }
}

/// A fixed smooth variable cross-section pair satisfying the model
/// assumptions pointwise: `sigma_t` in `[1.5, 2.5]`, `sigma_a` in
/// `[0.75, 1.25]`.
pub fn smooth_variable_materials() -> MaterialSpec {
    use std::f64::consts::PI;
    MaterialSpec::Variable {
        sigma_t: Arc::new(|x: &[f64; 2]| {
            2.0 + 0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        }),
        sigma_a: Arc::new(|x: &[f64; 2]| 1.0 + 0.25 * (2.0 * PI * x[0]).cos()),
    }
}
