//! Executable matrix-stability theory for the differential TD iteration.
//!
//! The deterministic mean dynamics of the learner follow dv/dt = −A v with
//! `A = D_μ(I − P_π^n + η e eᵀ)`. Convergence hinges on A being strictly
//! positive stable (every eigenvalue has positive real part), a rank-one
//! perturbation question about the singular M-matrix `B = I − K` with
//! `K = (I − D_μ) + D_μ P_π^n`.
//!
//! This module constructs K, B, A, computes spectra and kernels, runs the
//! five rank-one perturbation conditions as numeric checks, evaluates the
//! closed-form step-size bound η₀ and the doubly-stochastic Lyapunov
//! certificate, and locates the deterministic fixed point v_∞. A
//! [`StabilityReport`] keeps certificates (hypotheses of a theorem verified
//! numerically) separate from the plain empirical spectrum test.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};

/// Minimum real part that counts as strictly positive; separates the
/// structural zero eigenvalue of B from genuinely positive ones at the
/// ~1e-12 accuracy these small spectra are computed to.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance on the kernel identities B·e = 0 and (d_π/d_μ)ᵀB = 0.
pub const KERNEL_TOLERANCE: f64 = 1e-8;

/// Row/column-sum tolerance for the doubly-stochastic test.
pub const DOUBLY_STOCHASTIC_TOLERANCE: f64 = 1e-10;

/// The matrices of the mean dynamics for one (P_π^n, d_μ, η) triple.
///
/// Invariants: K is nonnegative and row-stochastic, B = I − K, and
/// A = B + η d_μ eᵀ = D_μ(I − P_π^n) + η d_μ eᵀ.
#[derive(Debug, Clone)]
pub struct MatrixTriple {
    pub k: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub d_mu: DVector<f64>,
    pub eta: f64,
    pub n: usize,
}

fn check_row_stochastic(p: &DMatrix<f64>, tol: f64) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::Shape(format!("matrix is {}×{}", p.nrows(), p.ncols())));
    }
    for i in 0..p.nrows() {
        let mut sum = 0.0;
        for j in 0..p.ncols() {
            let x = p[(i, j)];
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Input(format!("entry ({i},{j}) = {x} is not a probability")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::Input(format!("row {i} sums to {sum}, expected 1")));
        }
    }
    Ok(())
}

/// Builds K = (I − D_μ) + D_μ P_n, B = I − K, and A = B + η d_μ eᵀ.
///
/// Both algebraic routes to A (rank-one form and D_μ(I − P_n) + η d_μ eᵀ)
/// coincide here because the entries are assembled directly.
pub fn build_matrices(
    p_n: &DMatrix<f64>,
    d_mu: &DVector<f64>,
    eta: f64,
    n: usize,
) -> Result<MatrixTriple> {
    check_row_stochastic(p_n, 1e-10)?;
    let size = p_n.nrows();
    if d_mu.len() != size {
        return Err(Error::Shape(format!(
            "d_mu has {} entries, matrix is {size}×{size}",
            d_mu.len()
        )));
    }
    if d_mu.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::Input("d_mu must be strictly positive".into()));
    }
    if eta < 0.0 || !eta.is_finite() {
        return Err(Error::Input(format!("eta = {eta} must be nonnegative")));
    }
    if n == 0 {
        return Err(Error::Input("n must be ≥ 1".into()));
    }
    let mut k = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            let diag = if i == j { 1.0 - d_mu[i] } else { 0.0 };
            k[(i, j)] = diag + d_mu[i] * p_n[(i, j)];
        }
    }
    let b = DMatrix::identity(size, size) - &k;
    let mut a = b.clone();
    for i in 0..size {
        for j in 0..size {
            a[(i, j)] += eta * d_mu[i];
        }
    }
    Ok(MatrixTriple { k, b, a, d_mu: d_mu.clone(), eta, n })
}

/// All eigenvalues (with multiplicity) of a real square matrix, sorted by
/// (real part, imaginary part) for reproducible reporting.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("matrix is {}×{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    let mut eigs: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));
    Ok(eigs)
}

/// Verdict of one checkable condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    /// The condition could not be evaluated (e.g. kernels unavailable
    /// because the rank test failed).
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Holds => write!(f, "holds"),
            Verdict::Fails => write!(f, "fails"),
            Verdict::NotApplicable => write!(f, "not-applicable"),
        }
    }
}

/// Per-condition verdicts for the rank-one perturbation lemma, with the
/// kernels extracted along the way.
///
/// With v = η d_μ and w = e:
/// 1. K is nonnegative with spectral radius 1 (B = I − K is a singular
///    M-matrix).
/// 2. 0 is a geometrically simple eigenvalue of B; kernels span(e) and
///    span(d_π/d_μ).
/// 3. (z_lᵀ v)(wᵀ z_r) ≠ 0.
/// 4. wᵀB = 0 or Bv = 0.
/// 5. v, w > 0 and 2K_ij ≥ v_i w_j entrywise.
#[derive(Debug, Clone)]
pub struct BierkensConditions {
    pub c1: Verdict,
    pub c2: Verdict,
    pub c3: Verdict,
    pub c4: Verdict,
    pub c5: Verdict,
    /// Unit-norm right kernel of B (should align with e).
    pub kernel_right: DVector<f64>,
    /// Unit-norm left kernel of B (should align with d_π/d_μ).
    pub kernel_left: DVector<f64>,
    /// ‖kernel_right − e/‖e‖‖∞ after sign alignment.
    pub kernel_right_deviation: f64,
    /// ‖kernel_left − (d_π/d_μ)/‖d_π/d_μ‖‖∞ after sign alignment.
    pub kernel_left_deviation: f64,
}

impl BierkensConditions {
    /// Conditions 1–3 plus either 4 or 5: the hypotheses under which the
    /// perturbed matrix is certified strictly positive stable.
    pub fn certified(&self) -> bool {
        self.c1 == Verdict::Holds
            && self.c2 == Verdict::Holds
            && self.c3 == Verdict::Holds
            && (self.c4 == Verdict::Holds || self.c5 == Verdict::Holds)
    }
}

fn normalized_with_sign(v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.normalize();
    // Fix the sign so the largest-magnitude component is positive.
    let lead = out.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        out = -out;
    }
    out
}

/// Singular values of a real matrix through the symmetric eigenproblem of
/// the block matrix [[0, M], [Mᵀ, 0]], whose spectrum is {±σ_i}. The
/// symmetric solver keeps absolute accuracy near machine precision, which
/// the rank threshold below depends on.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("matrix is {}×{}", m.nrows(), m.ncols())));
    }
    let size = m.nrows();
    let mut aug = DMatrix::zeros(2 * size, 2 * size);
    aug.view_mut((0, size), (size, size)).copy_from(m);
    aug.view_mut((size, 0), (size, size)).copy_from(&m.transpose());
    let mut mags: Vec<f64> = aug.symmetric_eigenvalues().iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    // The ±σ pairs leave every singular value duplicated; keep one copy.
    Ok(mags.into_iter().step_by(2).collect())
}

/// One-dimensional kernel direction of a (numerically) singular matrix by
/// inverse iteration: a few solves against M + δI with a tiny shift δ
/// amplify the zero-eigenvalue direction by ~1/δ per pass. Accurate to
/// roughly machine precision over the spectral gap, which is far better
/// than a dense SVD delivers on these matrices.
fn kernel_direction(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let size = m.nrows();
    let scale = m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())).max(f64::MIN_POSITIVE);
    let shifted = m + DMatrix::from_diagonal_element(size, size, scale * 1e-13);
    let lu = shifted.lu();
    // Fixed generic start vector; any vector with nonzero overlap works.
    let mut z = DVector::from_fn(size, |i, _| 1.0 + 0.37 * i as f64).normalize();
    for _ in 0..3 {
        z = lu
            .solve(&z)
            .ok_or_else(|| Error::Singular("kernel iteration hit an exactly singular shift".into()))?;
        let norm = z.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Singular("kernel iteration diverged".into()));
        }
        z /= norm;
    }
    Ok(z)
}

/// Runs the five conditions against a built triple, given the target-policy
/// stationary distribution for the analytic left kernel.
pub fn check_bierkens(triple: &MatrixTriple, d_pi: &DVector<f64>) -> Result<BierkensConditions> {
    let size = triple.k.nrows();
    if d_pi.len() != size {
        return Err(Error::Shape(format!(
            "d_pi has {} entries, matrices are {size}×{size}",
            d_pi.len()
        )));
    }

    // Condition 1: K ≥ 0 and λ_max(K) = 1.
    let nonnegative = triple.k.iter().all(|&x| x >= -1e-14);
    let k_spectrum = spectrum(&triple.k)?;
    let spectral_radius = k_spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let c1 = if nonnegative && (spectral_radius - 1.0).abs() <= STABILITY_TOLERANCE {
        Verdict::Holds
    } else {
        Verdict::Fails
    };

    // Condition 2: rank(B) = |S| − 1 with kernels matching e and d_π/d_μ.
    let sigmas = singular_values(&triple.b)?;
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    let threshold = RANK_RELATIVE_TOLERANCE * sigma_max.max(f64::MIN_POSITIVE);
    let numerical_rank = sigmas.iter().filter(|&&s| s > threshold).count();
    let kernel_right = normalized_with_sign(&kernel_direction(&triple.b)?);
    let kernel_left = normalized_with_sign(&kernel_direction(&triple.b.transpose())?);

    let e_dir = normalized_with_sign(&DVector::from_element(size, 1.0));
    let ratio_dir = normalized_with_sign(&DVector::from_fn(size, |i, _| d_pi[i] / triple.d_mu[i]));
    let kernel_right_deviation = (&kernel_right - &e_dir).abs().max();
    let kernel_left_deviation = (&kernel_left - &ratio_dir).abs().max();

    let c2 = if numerical_rank == size - 1
        && kernel_right_deviation <= KERNEL_TOLERANCE
        && kernel_left_deviation <= KERNEL_TOLERANCE
    {
        Verdict::Holds
    } else {
        Verdict::Fails
    };

    // Condition 3: (z_lᵀ v)(wᵀ z_r) ≠ 0 with v = η d_μ, w = e; evaluated on
    // the extracted kernels, so it needs Condition 2's kernels to exist.
    let c3 = if c2 == Verdict::Holds {
        let zl_v = triple.eta * kernel_left.dot(&triple.d_mu);
        let w_zr: f64 = kernel_right.sum();
        if (zl_v * w_zr).abs() > STABILITY_TOLERANCE {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    } else {
        Verdict::NotApplicable
    };

    // Condition 4: wᵀB = 0 (column sums vanish) or Bv = 0.
    let col_sums_max = (DVector::from_element(size, 1.0).transpose() * &triple.b).abs().max();
    let bv_max = (&triple.b * (triple.eta * &triple.d_mu)).abs().max();
    let c4 = if col_sums_max <= 1e-10 || bv_max <= 1e-10 { Verdict::Holds } else { Verdict::Fails };

    // Condition 5: v, w > 0 (structural here) and 2K_ij ≥ η d_μ(i).
    let mut entrywise = true;
    for i in 0..size {
        let bound = triple.eta * triple.d_mu[i];
        for j in 0..size {
            if 2.0 * triple.k[(i, j)] < bound - 1e-12 {
                entrywise = false;
            }
        }
    }
    let positive = triple.d_mu.iter().all(|&x| x > 0.0);
    let c5 = if positive && entrywise { Verdict::Holds } else { Verdict::Fails };

    Ok(BierkensConditions {
        c1,
        c2,
        c3,
        c4,
        c5,
        kernel_right,
        kernel_left,
        kernel_right_deviation,
        kernel_left_deviation,
    })
}

/// Closed-form off-policy step-size bound η₀ = 2·min_{i,j} P_n(i,j).
///
/// Returns 0 when P_n has a zero entry, signaling that the strict
/// positivity assumption fails and the bound is vacuous.
pub fn eta0_bound(p_n: &DMatrix<f64>) -> f64 {
    2.0 * p_n.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0)
}

/// True when P row sums and column sums are all within 1e-10 of one.
pub fn is_doubly_stochastic(p_n: &DMatrix<f64>) -> bool {
    if p_n.nrows() != p_n.ncols() {
        return false;
    }
    let size = p_n.nrows();
    (0..size).all(|i| (p_n.row(i).sum() - 1.0).abs() <= DOUBLY_STOCHASTIC_TOLERANCE)
        && (0..size).all(|j| (p_n.column(j).sum() - 1.0).abs() <= DOUBLY_STOCHASTIC_TOLERANCE)
}

/// Lyapunov sufficiency test with weight matrix M = D_μ^{-1}: forms the
/// symmetric part of AᵀM + MA, which is
/// `(I − P_nᵀ + η e eᵀ) + (I − P_n + η e eᵀ)`, and tests positive
/// definiteness.
///
/// D_μ cancels out of the Lyapunov form, so a pass certifies strict
/// positive stability of D_μ(I − P_n + η e eᵀ) for every positive d_μ at
/// once. The certificate is sound whenever P_n is doubly stochastic; see
/// [`is_doubly_stochastic`].
pub fn lyapunov_check(p_n: &DMatrix<f64>, eta: f64) -> Result<bool> {
    check_row_stochastic(p_n, 1e-10)?;
    let size = p_n.nrows();
    let identity = DMatrix::<f64>::identity(size, size);
    let half = &identity - p_n + DMatrix::from_element(size, size, eta);
    let s = &half + half.transpose();
    let min_eig = s.symmetric_eigenvalues().min();
    Ok(min_eig > STABILITY_TOLERANCE)
}

/// Lipschitz constant of the sampled update operator in the ∞-norm:
/// L = max{1, ρ̄·(η|S| + 2)} with ρ̄ = (1/μ_min)^n the worst-case product
/// of importance ratios.
pub fn lipschitz_bound(mu_min: f64, n: usize, eta: f64, num_states: usize) -> Result<f64> {
    if mu_min <= 0.0 || !mu_min.is_finite() {
        return Err(Error::Domain(format!("mu_min = {mu_min} must be positive")));
    }
    let rho_bar = mu_min.recip().powi(n as i32);
    Ok(1.0f64.max(rho_bar * (eta * num_states as f64 + 2.0)))
}

/// The expected update direction h(v) = D_μ(r⁽ⁿ⁾ − η(Σv)e + P_n v − v).
pub fn expected_operator(
    p_n: &DMatrix<f64>,
    r_n: &DVector<f64>,
    d_mu: &DVector<f64>,
    eta: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let size = p_n.nrows();
    if p_n.ncols() != size || r_n.len() != size || d_mu.len() != size || v.len() != size {
        return Err(Error::Shape("expected-operator inputs have inconsistent sizes".into()));
    }
    let sum_v: f64 = v.sum();
    let pv = p_n * v;
    Ok(DVector::from_fn(size, |i, _| d_mu[i] * (r_n[i] - eta * sum_v + pv[i] - v[i])))
}

/// Solves the deterministic equilibrium (I − P_n + η e eᵀ) v = r⁽ⁿ⁾.
///
/// The system is nonsingular whenever the mean dynamics are strictly
/// positive stable; a singular solve is reported with the offending η.
pub fn fixed_point(p_n: &DMatrix<f64>, r_n: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    let size = p_n.nrows();
    if p_n.ncols() != size || r_n.len() != size {
        return Err(Error::Shape("fixed-point inputs have inconsistent sizes".into()));
    }
    let m = DMatrix::<f64>::identity(size, size) - p_n + DMatrix::from_element(size, size, eta);
    let v = m
        .clone()
        .lu()
        .solve(r_n)
        .ok_or_else(|| Error::Singular(format!("equilibrium system is singular at eta = {eta}")))?;
    let residual = (&m * &v - r_n).abs().max();
    if residual > 1e-10 * (1.0 + r_n.abs().max()) {
        return Err(Error::Singular(format!(
            "equilibrium solve at eta = {eta} left residual {residual:.3e}"
        )));
    }
    Ok(v)
}

/// A theorem whose hypotheses were verified numerically for this instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// On-policy (d_μ = d_π): conditions 1–3 plus wᵀB = 0.
    OnPolicy,
    /// P_n strictly positive and η ≤ η₀ = 2·min P_n: conditions 1–3 plus
    /// the entrywise condition 5.
    EtaBound,
    /// P_n doubly stochastic and the Lyapunov form positive definite.
    DoublyStochastic,
}

impl std::fmt::Display for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Certificate::OnPolicy => write!(f, "on-policy rank-one perturbation"),
            Certificate::EtaBound => write!(f, "eta within the 2·min P^n bound"),
            Certificate::DoublyStochastic => write!(f, "doubly-stochastic Lyapunov form"),
        }
    }
}

/// Full stability analysis of one (MDP, target, behavior, η, n) instance.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub num_states: usize,
    pub eta: f64,
    pub n: usize,
    /// Eigenvalues of A sorted by (re, im).
    pub spectrum: Vec<Complex<f64>>,
    pub min_real_part: f64,
    /// Empirical verdict: min real part above the stability tolerance.
    pub strictly_positive_stable: bool,
    pub bierkens: BierkensConditions,
    pub eta0: Option<f64>,
    /// Some(pd) when P_n is doubly stochastic and the certificate applies.
    pub lyapunov_pd: Option<bool>,
    pub doubly_stochastic: bool,
    /// Certificates whose hypotheses were verified; empty means the
    /// spectrum evidence stands alone.
    pub certificates: Vec<Certificate>,
}

impl StabilityReport {
    pub fn kernel_left(&self) -> &DVector<f64> {
        &self.bierkens.kernel_left
    }

    pub fn kernel_right(&self) -> &DVector<f64> {
        &self.bierkens.kernel_right
    }
}

/// Builds the matrices for (chain, d_μ, η, n) and assembles the full
/// report: spectrum, rank-one perturbation conditions, η₀, the Lyapunov
/// test where applicable, and the certificate list.
pub fn analyze_chain(
    p_n: &DMatrix<f64>,
    d_mu: &DVector<f64>,
    d_pi: &DVector<f64>,
    eta: f64,
    n: usize,
) -> Result<StabilityReport> {
    let triple = build_matrices(p_n, d_mu, eta, n)?;
    let a_spectrum = spectrum(&triple.a)?;
    let min_real_part = a_spectrum.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let strictly_positive_stable = min_real_part > STABILITY_TOLERANCE;
    let bierkens = check_bierkens(&triple, d_pi)?;

    let eta0 = eta0_bound(p_n);
    let doubly_stochastic = is_doubly_stochastic(p_n);
    let lyapunov_pd = if doubly_stochastic { Some(lyapunov_check(p_n, eta)?) } else { None };

    let mut certificates = Vec::new();
    let on_policy = (d_mu - d_pi).abs().max() <= KERNEL_TOLERANCE;
    let base = bierkens.c1 == Verdict::Holds
        && bierkens.c2 == Verdict::Holds
        && bierkens.c3 == Verdict::Holds;
    if on_policy && base && bierkens.c4 == Verdict::Holds {
        certificates.push(Certificate::OnPolicy);
    }
    if eta0 > 0.0 && eta <= eta0 && base && bierkens.c5 == Verdict::Holds {
        certificates.push(Certificate::EtaBound);
    }
    if lyapunov_pd == Some(true) {
        certificates.push(Certificate::DoublyStochastic);
    }

    Ok(StabilityReport {
        num_states: p_n.nrows(),
        eta,
        n,
        spectrum: a_spectrum,
        min_real_part,
        strictly_positive_stable,
        bierkens,
        eta0: Some(eta0),
        lyapunov_pd,
        doubly_stochastic,
        certificates,
    })
}

/// Convenience entry point from MDP + policies: induces both chains,
/// computes stationary distributions and the n-step kernel, and analyzes.
pub fn analyze(
    mdp: &TabularMdp,
    target: &Policy,
    behavior: &Policy,
    eta: f64,
    n: usize,
) -> Result<StabilityReport> {
    use crate::mdp::{induced_dynamics, n_step_kernel, stationary_distribution};
    let target_chain = induced_dynamics(mdp, target)?;
    let behavior_chain = induced_dynamics(mdp, behavior)?;
    let d_pi = stationary_distribution(&target_chain.p)?;
    let d_mu = stationary_distribution(&behavior_chain.p)?;
    let (p_n, _) = n_step_kernel(&target_chain, n)?;
    analyze_chain(&p_n, &d_mu, &d_pi, eta, n)
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "stability report")?;
        writeln!(f, "  states            : {}", self.num_states)?;
        writeln!(f, "  n                 : {}", self.n)?;
        writeln!(f, "  eta               : {}", self.eta)?;
        writeln!(f, "  min Re(eig A)     : {:.6e}", self.min_real_part)?;
        writeln!(
            f,
            "  empirical verdict : {}",
            if self.strictly_positive_stable { "strictly positive stable" } else { "NOT stable" }
        )?;
        if let Some(eta0) = self.eta0 {
            writeln!(f, "  eta0 = 2 min P^n  : {eta0}")?;
        }
        writeln!(f, "  doubly stochastic : {}", if self.doubly_stochastic { "yes" } else { "no" })?;
        match self.lyapunov_pd {
            Some(pd) => writeln!(
                f,
                "  lyapunov form     : {}",
                if pd { "positive definite" } else { "not positive definite" }
            )?,
            None => writeln!(f, "  lyapunov form     : not applicable (P^n not doubly stochastic)")?,
        }
        writeln!(
            f,
            "  conditions        : c1 {}, c2 {}, c3 {}, c4 {}, c5 {}",
            self.bierkens.c1, self.bierkens.c2, self.bierkens.c3, self.bierkens.c4, self.bierkens.c5
        )?;
        writeln!(
            f,
            "  kernel deviations : right {:.3e} (vs e), left {:.3e} (vs d_pi/d_mu)",
            self.bierkens.kernel_right_deviation, self.bierkens.kernel_left_deviation
        )?;
        if self.certificates.is_empty() {
            writeln!(f, "  certified stable  : no (empirical spectrum only)")?;
        } else {
            for c in &self.certificates {
                writeln!(f, "  certified stable  : {c}")?;
            }
        }
        writeln!(f, "  spectrum (re, im):")?;
        for z in &self.spectrum {
            writeln!(f, "    {:+.12e} {:+.12e}", z.re, z.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_pair() -> (DMatrix<f64>, DVector<f64>) {
        (
            DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
    }

    #[test]
    fn build_matrices_by_hand() {
        let (p, d) = uniform_pair();
        let triple = build_matrices(&p, &d, 1.0, 1).unwrap();
        // K = (I − D) + D P = [[0.75, 0.25], [0.25, 0.75]].
        assert!((triple.k[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((triple.k[(0, 1)] - 0.25).abs() < 1e-15);
        // A = B + η d eᵀ = [[0.75, 0.25], [0.25, 0.75]].
        assert!((triple.a[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((triple.a[(1, 0)] - 0.25).abs() < 1e-15);
        // Second construction route: A = D(I − P) + η d eᵀ.
        let size = p.nrows();
        let alt = DMatrix::from_fn(size, size, |i, j| {
            d[i] * ((if i == j { 1.0 } else { 0.0 }) - p[(i, j)]) + 1.0 * d[i]
        });
        assert!((&triple.a - alt).abs().max() < 1e-12);
    }

    #[test]
    fn build_matrices_rejects_bad_inputs() {
        let (p, d) = uniform_pair();
        assert!(build_matrices(&p, &d, -0.5, 1).is_err());
        assert!(build_matrices(&p, &DVector::from_row_slice(&[1.0, 0.0]), 1.0, 1).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.6, 0.6, 0.5, 0.5]);
        assert!(build_matrices(&bad, &d, 1.0, 1).is_err());
    }

    #[test]
    fn zero_eta_collapses_to_b() {
        // The rank-one term vanishes, so A = B and A·e = 0.
        let (p, d) = uniform_pair();
        let triple = build_matrices(&p, &d, 0.0, 1).unwrap();
        assert_eq!(triple.a, triple.b);
        let row_sums = &triple.a * DVector::from_element(2, 1.0);
        assert!(row_sums.abs().max() < 1e-15);
    }

    #[test]
    fn spectrum_identity_and_hand_case() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let eigs = spectrum(&eye).unwrap();
        assert!(eigs.iter().all(|z| (z.re - 1.0).abs() < 1e-12 && z.im.abs() < 1e-12));
        // Characteristic polynomial of [[0.75, 0.25], [0.25, 0.75]] has
        // roots 1 and 0.5.
        let m = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        let eigs = spectrum(&m).unwrap();
        assert!((eigs[0].re - 0.5).abs() < 1e-12);
        assert!((eigs[1].re - 1.0).abs() < 1e-12);
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(spectrum(&rect).is_err());
    }

    #[test]
    fn row_stochastic_matrices_have_unit_spectral_radius() {
        let p = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2]);
        let d = DVector::from_row_slice(&[0.3, 0.3, 0.4]);
        let triple = build_matrices(&p, &d, 0.5, 1).unwrap();
        let eigs = spectrum(&triple.k).unwrap();
        let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((radius - 1.0).abs() < 1e-9);
        assert!(eigs.iter().any(|z| (z.re - 1.0).abs() < 1e-9 && z.im.abs() < 1e-9));
    }

    #[test]
    fn eta0_values() {
        let (p, _) = uniform_pair();
        assert_eq!(eta0_bound(&p), 1.0);
        let with_zero = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert_eq!(eta0_bound(&with_zero), 0.0);
    }

    #[test]
    fn lipschitz_values() {
        assert_eq!(lipschitz_bound(1.0, 1, 0.0, 1).unwrap(), 2.0);
        assert_eq!(lipschitz_bound(0.5, 2, 0.1, 25).unwrap(), 18.0);
        assert!(lipschitz_bound(0.0, 1, 1.0, 1).is_err());
        // On-policy: ρ̄ = 1 so the bound is η|S| + 2 once that exceeds 1.
        assert_eq!(lipschitz_bound(1.0, 3, 0.5, 10).unwrap(), 7.0);
    }

    #[test]
    fn lyapunov_degenerate_is_rejected() {
        let eye = DMatrix::<f64>::identity(3, 3);
        // η = 0 with P = I gives S = 0, not positive definite.
        assert!(!lyapunov_check(&eye, 0.0).unwrap());
    }

    #[test]
    fn doubly_stochastic_detection() {
        let (p, _) = uniform_pair();
        assert!(is_doubly_stochastic(&p));
        let not = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        assert!(!is_doubly_stochastic(&not));
    }

    #[test]
    fn expected_operator_zeroes() {
        let (p, d) = uniform_pair();
        let r = DVector::zeros(2);
        let v = DVector::zeros(2);
        let h = expected_operator(&p, &r, &d, 1.0, &v).unwrap();
        assert_eq!(h.abs().max(), 0.0);
    }

    #[test]
    fn fixed_point_constant_reward() {
        // r⁽ⁿ⁾ = n·c·e gives v = (n c / (η |S|)) e.
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let n = 3usize;
        let c = 0.7;
        let eta = 0.4;
        let r_n = DVector::from_element(2, n as f64 * c);
        let v = fixed_point(&p, &r_n, eta).unwrap();
        let expected = n as f64 * c / (eta * 2.0);
        assert!((v[0] - expected).abs() < 1e-10);
        assert!((v[1] - expected).abs() < 1e-10);
        let h = expected_operator(&p, &r_n, &DVector::from_row_slice(&[0.5, 0.5]), eta, &v).unwrap();
        assert!(h.abs().max() < 1e-10);
    }
}
