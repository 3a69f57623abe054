//! Evaluators and checks behind the `eval` and `check` subcommands.
//!
//! Each command returns an [`Outcome`]: printable lines, an optional CSV
//! table and the hard invariants that failed.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use dyadic_core::conditions::{
    a1_a2_witness, cond1_value, cond2_constant, dorverbitsky_value, linearizing_allocation,
    operator_norm, operator_norm_bruteforce, reduction_condition_sup, reduction_condition_value,
    weak_cond1_value, weak_cond2_value, AscentConfig, Certificate, ConditionReport, TestVariant,
    WeakReading, NORM_BRUTEFORCE_MAX_LEAVES,
};
use dyadic_core::operator::{
    apply_t, apply_t_star, kolmogorov_level_sup, kolmogorov_value, leaf_ls_aggregate,
    maximal_multiplier, mixed_norm, weak_norm,
};
use dyadic_core::sparse::{
    carleson_constant, dor_allocate, family_carleson_check, is_sigma_sparse, lambda2_bruteforce,
    CubeFamily, BRUTEFORCE_MAX_CUBES, BRUTEFORCE_MAX_LEAVES,
};
use dyadic_core::suite::{BAND_LIMIT, NECESSITY_LIMIT};
use dyadic_core::wolff::{
    domination_ratio, wolff_condition_value, wolff_dyadic, wolff_sparse, wolff_sparse_family,
};
use dyadic_core::{
    CubeCoefficients, CubeId, DisjointAllocation, Error, LeafFunction, LeafMeasure, Rational,
    Scalar,
};

use crate::instance::{cube_label, InputError, Instance};

/// Failure of a command, mapped onto the exit-code contract.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(#[from] InputError),
    #[error("evaluator error: {0}")]
    Eval(#[from] Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Eval(_) => 3,
        }
    }
}

/// Exit status for a run whose hard invariants failed.
pub const GATE_FAILURE: u8 = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| CliError::Output(e.to_string()))?;
        writer
            .write_record(&self.header)
            .map_err(|e| CliError::Output(e.to_string()))?;
        for row in &self.rows {
            writer
                .write_record(row)
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
        writer.flush().map_err(|e| CliError::Output(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub table: Option<Table>,
    /// Hard invariants that did not hold.
    pub failures: Vec<String>,
}

impl Outcome {
    fn line(&mut self, text: impl Into<String>) {
        self.lines.push(text.into());
    }

    fn require(&mut self, holds: bool, what: impl Into<String>) {
        let what = what.into();
        self.line(format!("{} {what}", if holds { "ok  " } else { "FAIL" }));
        if !holds {
            self.failures.push(what);
        }
    }

    pub fn print(&self, out: &mut impl Write) -> std::io::Result<()> {
        for line in &self.lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn exit_code(&self) -> u8 {
        if self.failures.is_empty() {
            0
        } else {
            GATE_FAILURE
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    Norm,
    T,
    Tstar,
    Mixed,
    Weak,
    Wolff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    Equivalence,
    Necessity,
    Sparse,
    Carleson,
    Dor,
    DualWitness,
    Endpoints,
    Weak,
}

/// Options shared by `eval` and `check`.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub exact: bool,
    pub atomic: bool,
    pub variant: TestVariant,
    pub reading: WeakReading,
    pub family: Option<String>,
}

impl Options {
    fn ascent(&self, inst: &Instance) -> AscentConfig {
        AscentConfig {
            seed: self.seed.or(inst.seed).unwrap_or(0),
            ..AscentConfig::default()
        }
    }
}

const ORACLE_GAP: f64 = 0.01;
const HOMOGENEITY: f64 = 1e-10;
const DISJOINT: f64 = 1e-9;
const LAMBDA_GAP: f64 = 0.02;
const WITNESS: f64 = 1e-9;
const ENDPOINT: f64 = 1e-10;

fn missing(field: &str, why: &str) -> CliError {
    CliError::Input(InputError::new(field, format!("required {why}")))
}

fn fmt_report(name: &str, report: &ConditionReport) -> String {
    match report.seed {
        Some(seed) => format!(
            "{name} = {} ({}, seed {seed})",
            report.value,
            report.method.as_str()
        ),
        None => format!("{name} = {} ({})", report.value, report.method.as_str()),
    }
}

fn certificate_lines(out: &mut Outcome, inst: &Instance, report: &ConditionReport) {
    match &report.certificate {
        Certificate::None => {}
        Certificate::Function(f) => {
            let values: Vec<String> = f.values().iter().map(|v| format!("{v}")).collect();
            out.line(format!("  certificate f = [{}]", values.join(", ")));
        }
        Certificate::Weights(w) => {
            for (cube, beta) in w {
                out.line(format!(
                    "  certificate beta {} = {beta}",
                    cube_label(&inst.grid, *cube)
                ));
            }
        }
        Certificate::Allocation(a) => {
            for (cube, mass) in a.masses(&inst.mu) {
                out.line(format!(
                    "  certificate mu(E {}) = {mass}",
                    cube_label(&inst.grid, cube)
                ));
            }
        }
    }
}

pub fn eval(inst: &Instance, target: EvalTarget, opts: &Options) -> Result<Outcome, CliError> {
    match target {
        EvalTarget::Norm => eval_norm(inst, opts),
        EvalTarget::T => eval_t(inst),
        EvalTarget::Tstar => eval_t_star(inst),
        EvalTarget::Mixed => eval_mixed(inst),
        EvalTarget::Weak => eval_weak(inst),
        EvalTarget::Wolff => eval_wolff(inst, opts),
    }
}

pub fn check(inst: &Instance, target: CheckTarget, opts: &Options) -> Result<Outcome, CliError> {
    match target {
        CheckTarget::Equivalence => check_equivalence(inst, opts),
        CheckTarget::Necessity => check_necessity(inst, opts),
        CheckTarget::Sparse => check_sparse(inst, opts),
        CheckTarget::Carleson => check_carleson(inst, opts),
        CheckTarget::Dor => check_dor(inst, opts),
        CheckTarget::DualWitness => check_dual_witness(inst),
        CheckTarget::Endpoints => check_endpoints(inst),
        CheckTarget::Weak => check_weak(inst, opts),
    }
}

fn eval_norm(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let report = operator_norm(
        &inst.lambda,
        &inst.sigma,
        &inst.mu,
        &inst.exponents,
        &opts.ascent(inst),
    )?;
    out.line(fmt_report("operator_norm", &report));
    certificate_lines(&mut out, inst, &report);
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["operator_norm".into(), report.value.to_string()]);
    if inst.grid.num_leaves() <= NORM_BRUTEFORCE_MAX_LEAVES {
        let brute =
            operator_norm_bruteforce(&inst.lambda, &inst.sigma, &inst.mu, &inst.exponents, 48)?;
        out.line(fmt_report("grid_search", &brute));
        table.push(vec!["grid_search".into(), brute.value.to_string()]);
    }
    out.table = Some(table);
    Ok(out)
}

fn cube_table(
    inst: &Instance,
    values: impl Iterator<Item = (CubeId, f64)>,
    out: &mut Outcome,
    name: &str,
) -> Table {
    let mut table = Table::new(&["level", "index", "value"]);
    for (cube, value) in values {
        let coords: Vec<String> = inst.grid.coords(cube).iter().map(u64::to_string).collect();
        table.push(vec![
            cube.level.to_string(),
            coords.join(" "),
            value.to_string(),
        ]);
        if value != 0.0 {
            out.line(format!("{name} {} = {value}", cube_label(&inst.grid, cube)));
        }
    }
    table
}

fn leaf_table(values: &[f64], out: &mut Outcome, name: &str) -> Table {
    let mut table = Table::new(&["leaf", "value"]);
    for (leaf, value) in values.iter().enumerate() {
        table.push(vec![leaf.to_string(), value.to_string()]);
        out.line(format!("{name}[{leaf}] = {value}"));
    }
    table
}

fn test_function(inst: &Instance) -> Result<&LeafFunction, CliError> {
    inst.f
        .as_ref()
        .ok_or_else(|| missing("f", "for this evaluator"))
}

fn eval_t(inst: &Instance) -> Result<Outcome, CliError> {
    let f = test_function(inst)?;
    let mut out = Outcome::default();
    let tf = apply_t(&inst.lambda, &inst.sigma, f)?;
    let table = cube_table(
        inst,
        inst.grid.enumerate_cubes().map(|q| (q, tf.get(q))),
        &mut out,
        "Tf",
    );
    out.line(format!(
        "mixed_norm = {}",
        mixed_norm(&tf, &inst.exponents, &inst.mu)
    ));
    out.table = Some(table);
    Ok(out)
}

fn eval_t_star(inst: &Instance) -> Result<Outcome, CliError> {
    let g = inst
        .g
        .as_ref()
        .ok_or_else(|| missing("g", "for the adjoint"))?;
    let mut out = Outcome::default();
    let h = apply_t_star(&inst.lambda, &inst.mu, g);
    let table = leaf_table(h.values(), &mut out, "T*g");
    out.line(format!(
        "lp_norm = {}",
        h.lp_norm(inst.exponents.p_conj(), &inst.sigma)
    ));
    out.table = Some(table);
    Ok(out)
}

fn eval_mixed(inst: &Instance) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let e = &inst.exponents;
    let mut table = Table::new(&["quantity", "value"]);
    if let Some(f) = &inst.f {
        let tf = apply_t(&inst.lambda, &inst.sigma, f)?;
        let norm = mixed_norm(&tf, e, &inst.mu);
        let f_norm = f.lp_norm(e.p, &inst.sigma);
        out.line(format!("mixed_norm(Tf) = {norm}"));
        out.line(format!("lp_norm(f) = {f_norm}"));
        table.push(vec!["mixed_norm_tf".into(), norm.to_string()]);
        table.push(vec!["lp_norm_f".into(), f_norm.to_string()]);
        if f_norm > 0.0 {
            out.line(format!("ratio = {}", norm / f_norm));
            table.push(vec!["ratio".into(), (norm / f_norm).to_string()]);
        }
    }
    if let Some(g) = &inst.g {
        let norm = mixed_norm(g, e, &inst.mu);
        out.line(format!("mixed_norm(g) = {norm}"));
        table.push(vec!["mixed_norm_g".into(), norm.to_string()]);
    }
    if inst.f.is_none() && inst.g.is_none() {
        return Err(missing("f", "(or g) for the mixed norm"));
    }
    out.table = Some(table);
    Ok(out)
}

/// The leaf function `‖Tf(x)‖_{ℓ^s}` whose weak norm is measured.
fn aggregate(inst: &Instance) -> Result<LeafFunction, CliError> {
    let f = test_function(inst)?;
    let tf = apply_t(&inst.lambda, &inst.sigma, f)?;
    Ok(LeafFunction::nonneg(
        inst.grid,
        leaf_ls_aggregate(&tf, inst.exponents.s),
    )?)
}

fn weak_alpha(inst: &Instance) -> f64 {
    inst.weak
        .as_ref()
        .map(|w| w.0)
        .unwrap_or(inst.exponents.q / 2.0)
}

fn eval_weak(inst: &Instance) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let q = inst.exponents.q;
    let alpha = weak_alpha(inst);
    let h = aggregate(inst)?;
    let weak = weak_norm(&h, q, &inst.mu).powf(1.0 / q);
    let kolmogorov = kolmogorov_level_sup(&h, q, alpha, &inst.mu)?;
    out.line(format!("weak_norm = {weak}"));
    out.line(format!("kolmogorov_sup(alpha = {alpha}) = {kolmogorov}"));
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["weak_norm".into(), weak.to_string()]);
    table.push(vec!["kolmogorov_sup".into(), kolmogorov.to_string()]);
    if let Some((_, Some(set))) = &inst.weak {
        let value = kolmogorov_value(&h, q, alpha, &inst.mu, set)?;
        out.line(format!("kolmogorov(set) = {value}"));
        table.push(vec!["kolmogorov_set".into(), value.to_string()]);
    }
    out.table = Some(table);
    Ok(out)
}

fn eval_wolff(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let (params, threshold) = inst
        .wolff
        .ok_or_else(|| missing("wolff", "for Wolff potentials"))?;
    let f = test_function(inst)?;
    let mut out = Outcome::default();
    let full = wolff_dyadic(f, &params)?;
    let family = match inst.family(opts.family.as_deref())? {
        Some((_, family)) => family,
        None => wolff_sparse_family(f, threshold.unwrap_or(2f64.powi(inst.grid.dim() as i32)))?,
    };
    let sparse = wolff_sparse(f, &params, &family)?;
    let mut table = Table::new(&["leaf", "dyadic", "sparse"]);
    for (leaf, (d, s)) in full.values().iter().zip(sparse.values()).enumerate() {
        out.line(format!("W[{leaf}] = {d}   W_S[{leaf}] = {s}"));
        table.push(vec![leaf.to_string(), d.to_string(), s.to_string()]);
    }
    let labels: Vec<String> = family.iter().map(|q| cube_label(&inst.grid, q)).collect();
    out.line(format!("sparse family = {{{}}}", labels.join(", ")));
    out.line(format!(
        "domination_ratio = {}",
        domination_ratio(&full, &sparse)
    ));
    out.line(format!(
        "condition_value = {}",
        wolff_condition_value(&inst.sigma, &inst.mu, &inst.exponents, &params, &family)
    ));
    out.table = Some(table);
    Ok(out)
}

fn check_equivalence(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let e = &inst.exponents;
    let config = opts.ascent(inst);
    let norm = operator_norm(&inst.lambda, &inst.sigma, &inst.mu, e, &config)?;
    let sup = reduction_condition_sup(&inst.lambda, &inst.sigma, &inst.mu, e, &config)?;
    out.line(fmt_report("operator_norm", &norm));
    out.line(fmt_report("condition_sup", &sup));
    certificate_lines(&mut out, inst, &sup);
    let ratio = if norm.value == 0.0 && sup.value == 0.0 {
        1.0
    } else {
        norm.value / sup.value.powf(1.0 / e.q)
    };
    out.line(format!("band ratio = {ratio}"));
    out.require(
        (1.0 / BAND_LIMIT..=BAND_LIMIT).contains(&ratio),
        format!("norm / condition^(1/q) within [1/{BAND_LIMIT}, {BAND_LIMIT}]"),
    );

    if let Certificate::Allocation(alloc) = &sup.certificate {
        let t = 2.0;
        let base = reduction_condition_value(&inst.lambda, &inst.sigma, &inst.mu, e, alloc)?;
        let moved =
            reduction_condition_value(&inst.lambda.scaled(t), &inst.sigma, &inst.mu, e, alloc)?;
        let target = t.powf(e.q) * base;
        let gap = (moved - target).abs() / target.abs().max(1.0);
        out.require(
            gap <= HOMOGENEITY,
            format!("condition homogeneous of degree q (gap {gap:.3e})"),
        );
    }
    if let Some(alloc) = &inst.allocation {
        let value = reduction_condition_value(&inst.lambda, &inst.sigma, &inst.mu, e, alloc)?;
        out.line(format!("condition at given allocation = {value}"));
    }
    if inst.grid.num_leaves() <= NORM_BRUTEFORCE_MAX_LEAVES {
        let brute = operator_norm_bruteforce(&inst.lambda, &inst.sigma, &inst.mu, e, 48)?;
        out.line(fmt_report("grid_search", &brute));
        let gap = if norm.value == brute.value {
            0.0
        } else {
            (norm.value - brute.value).abs() / norm.value.max(brute.value)
        };
        out.require(
            gap <= ORACLE_GAP,
            format!("ascent matches grid search (gap {gap:.3e})"),
        );
    }
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["operator_norm".into(), norm.value.to_string()]);
    table.push(vec!["condition_sup".into(), sup.value.to_string()]);
    table.push(vec!["ratio".into(), ratio.to_string()]);
    out.table = Some(table);
    Ok(out)
}

fn necessity(value: f64, norm: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else if norm == 0.0 {
        f64::INFINITY
    } else {
        value / norm
    }
}

fn check_necessity(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let e = &inst.exponents;
    let config = opts.ascent(inst);
    let norm = operator_norm(&inst.lambda, &inst.sigma, &inst.mu, e, &config)?;
    out.line(fmt_report("operator_norm", &norm));
    let (name, family) = inst.family(opts.family.as_deref())?.unwrap_or_else(|| {
        (
            "root".to_string(),
            CubeFamily::from_cubes(inst.grid, [CubeId::ROOT]).expect("root"),
        )
    });
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["operator_norm".into(), norm.value.to_string()]);

    if let Some(g) = &inst.g {
        let value = cond1_value(&inst.lambda, &inst.sigma, &inst.mu, e, &family, g)?;
        let ratio = necessity(value, norm.value);
        out.line(format!("cond1({name}, g) = {value}"));
        out.require(
            ratio <= NECESSITY_LIMIT,
            format!("cond1 <= {NECESSITY_LIMIT} * norm (ratio {ratio})"),
        );
        table.push(vec!["cond1".into(), value.to_string()]);
    } else {
        out.line("cond1 skipped: no g given");
    }
    if let Some(beta) = &inst.beta {
        let value = dyadic_core::conditions::cond2_value(
            &inst.lambda,
            &inst.sigma,
            &inst.mu,
            e,
            beta,
            opts.variant,
        )?;
        out.line(format!("cond2(beta) = {value}"));
        table.push(vec!["cond2_given".into(), value.to_string()]);
    }
    let cond2 = cond2_constant(
        &inst.lambda,
        &inst.sigma,
        &inst.mu,
        e,
        &family,
        opts.variant,
        &config,
    )?;
    out.line(fmt_report(&format!("cond2_constant({name})"), &cond2));
    certificate_lines(&mut out, inst, &cond2);
    let ratio = necessity(cond2.value, norm.value);
    out.require(
        ratio <= NECESSITY_LIMIT,
        format!("cond2 <= {NECESSITY_LIMIT} * norm (ratio {ratio})"),
    );
    table.push(vec!["cond2_constant".into(), cond2.value.to_string()]);
    out.table = Some(table);
    Ok(out)
}

fn require_family(inst: &Instance, opts: &Options) -> Result<(String, CubeFamily), CliError> {
    inst.family(opts.family.as_deref())?
        .ok_or_else(|| missing("families", "for this check"))
}

fn check_sparse(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let (name, family) = require_family(inst, opts)?;
    let (sparse, carleson, witness) = if opts.exact {
        let two = Rational::from_integer(2.into());
        let s = is_sigma_sparse(&family, &inst.sigma_exact);
        let c = family_carleson_check(&family, &inst.sigma_exact, &two);
        (s.sparse, c.holds, c.worst)
    } else {
        let s = is_sigma_sparse(&family, &inst.sigma);
        let c = family_carleson_check(&family, &inst.sigma, &2.0);
        (s.sparse, c.holds, c.worst)
    };
    out.line(format!("family {name}: {} cubes", family.len()));
    out.line(format!("sigma_sparse = {sparse}"));
    out.line(format!("carleson(2) = {carleson}"));
    if let Some(cube) = witness {
        out.line(format!(
            "worst packing cube = {}",
            cube_label(&inst.grid, cube)
        ));
    }
    out.require(
        sparse == carleson,
        "sparseness agrees with the Carleson(2) packing test",
    );
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["sparse".into(), sparse.to_string()]);
    table.push(vec!["carleson".into(), carleson.to_string()]);
    out.table = Some(table);
    Ok(out)
}

fn check_carleson(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let (value, witness, unbounded) = if opts.exact {
        let r = carleson_constant(&inst.lambda_exact, &inst.mu_exact);
        out.line(format!("lambda1 (exact) = {}", r.constant));
        (r.value_f64(), r.witness, r.unbounded_at)
    } else {
        let r = carleson_constant(&inst.lambda, &inst.mu);
        (r.value_f64(), r.witness, r.unbounded_at)
    };
    out.line(format!("lambda1 = {value}"));
    if let Some(cube) = unbounded {
        out.line(format!("unbounded at {}", cube_label(&inst.grid, cube)));
    } else if let Some(cube) = witness {
        out.line(format!("attained at {}", cube_label(&inst.grid, cube)));
    }
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["lambda1".into(), value.to_string()]);
    let support = inst.lambda.support().count();
    if inst.grid.num_leaves() <= BRUTEFORCE_MAX_LEAVES && support <= BRUTEFORCE_MAX_CUBES {
        let lambda2 = lambda2_bruteforce(&inst.lambda, &inst.mu)?;
        out.line(format!("lambda2 = {lambda2}"));
        table.push(vec!["lambda2".into(), lambda2.to_string()]);
        let holds = if value.is_infinite() || lambda2.is_infinite() {
            value == lambda2
        } else {
            (value - lambda2).abs() <= LAMBDA_GAP * value
        };
        out.require(holds, "lambda1 = lambda2 within 2%");
    }
    out.table = Some(table);
    Ok(out)
}

fn check_dor(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    if opts.exact {
        dor_generic(inst, &inst.lambda_exact, &inst.mu_exact, opts.atomic)
    } else {
        dor_generic(inst, &inst.lambda, &inst.mu, opts.atomic)
    }
}

fn dor_generic<S: Scalar + std::fmt::Display>(
    inst: &Instance,
    lambda: &CubeCoefficients<S>,
    mu: &LeafMeasure<S>,
    atomic: bool,
) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let report = carleson_constant(lambda, mu);
    out.line(format!(
        "mode = {}",
        if atomic { "atomic" } else { "fractional" }
    ));
    let result = match report.unbounded_at {
        Some(cube) => {
            out.line(format!(
                "carleson constant infinite at {}",
                cube_label(&inst.grid, cube)
            ));
            Err(Error::Infeasible(cube))
        }
        None => {
            let c = if report.constant.is_zero() {
                S::one()
            } else {
                report.constant.clone()
            };
            out.line(format!("C = {c}"));
            dor_allocate(lambda, mu, &c, atomic).map(|alloc| (alloc, c))
        }
    };
    match result {
        Err(Error::Infeasible(cube)) => {
            out.line(format!("Infeasible({})", cube_label(&inst.grid, cube)));
            out.require(
                inst.expect_infeasible,
                "allocation outcome matches expect_infeasible",
            );
        }
        Err(other) => return Err(other.into()),
        Ok((alloc, c)) => {
            out.require(
                !inst.expect_infeasible,
                "allocation outcome matches expect_infeasible",
            );
            let floats = alloc.to_f64();
            out.require(
                floats.check_disjoint(DISJOINT).is_ok(),
                "sets are pairwise disjoint",
            );
            let masses = alloc.masses(mu);
            let mut table = Table::new(&["level", "index", "mass", "target"]);
            let mut exact = true;
            for (cube, coefficient) in lambda.support() {
                let target = coefficient.clone() / c.clone();
                let mass = masses.get(&cube).cloned().unwrap_or_else(S::zero);
                let (m, t) = (mass.to_f64_lossy(), target.to_f64_lossy());
                let holds = if atomic {
                    m >= t * (1.0 - DISJOINT)
                } else if S::REL_TOLERANCE == 0.0 {
                    mass == target
                } else {
                    (m - t).abs() <= DISJOINT * t.max(1.0)
                };
                exact &= holds;
                out.line(format!(
                    "mu(E {}) = {mass} (target {target})",
                    cube_label(&inst.grid, cube)
                ));
                let coords: Vec<String> =
                    inst.grid.coords(cube).iter().map(u64::to_string).collect();
                table.push(vec![
                    cube.level.to_string(),
                    coords.join(" "),
                    m.to_string(),
                    t.to_string(),
                ]);
            }
            out.require(
                exact,
                if atomic {
                    "masses reach lambda/C"
                } else {
                    "masses equal lambda/C"
                },
            );
            out.table = Some(table);
        }
    }
    Ok(out)
}

fn check_dual_witness(inst: &Instance) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let w = a1_a2_witness(&inst.lambda, &inst.mu, inst.exponents.s)?;
    out.line(format!("a1 = {}", w.a1));
    out.line(format!("pairing = {}", w.pairing));
    out.line(format!("denominator = {}", w.denominator));
    out.line(format!("ratio = {}", w.ratio));
    out.require(w.ratio >= w.a1 - WITNESS, "witness ratio reaches A1");
    out.require(
        w.denominator <= 1.0 + WITNESS,
        "witness denominator at most 1",
    );
    let table = cube_table(inst, w.witness.support(), &mut out, "witness");
    out.table = Some(table);
    Ok(out)
}

fn check_endpoints(inst: &Instance) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let b = &inst.lambda;
    let q = inst.exponents.q;
    let given = inst
        .allocation
        .clone()
        .unwrap_or_else(|| DisjointAllocation::new(inst.grid));
    let linear = linearizing_allocation(b);

    let at_q_given = dorverbitsky_value(b, &inst.mu, q, q, &given)?;
    let at_q_linear = dorverbitsky_value(b, &inst.mu, q, q, &linear)?;
    out.line(format!(
        "s = q: given allocation {at_q_given}, linearizing allocation {at_q_linear}"
    ));
    out.require(
        at_q_given == at_q_linear,
        "s = q value does not depend on the allocation",
    );

    let target = maximal_multiplier(b).lp_norm(q, &inst.mu);
    let at_inf_linear = dorverbitsky_value(b, &inst.mu, q, f64::INFINITY, &linear)?;
    let at_inf_given = dorverbitsky_value(b, &inst.mu, q, f64::INFINITY, &given)?;
    out.line(format!("s = inf: maximal multiplier norm {target}"));
    out.line(format!(
        "s = inf: linearizing allocation {at_inf_linear}, given allocation {at_inf_given}"
    ));
    let gap = (at_inf_linear - target).abs() / target.abs().max(1.0);
    out.require(
        gap <= ENDPOINT,
        format!("linearizing allocation attains the maximal multiplier (gap {gap:.3e})"),
    );
    out.require(
        at_inf_given <= target + ENDPOINT * target.max(1.0),
        "no allocation exceeds the maximal multiplier",
    );
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["s_eq_q".into(), at_q_linear.to_string()]);
    table.push(vec!["maximal_multiplier".into(), target.to_string()]);
    table.push(vec!["s_inf_linearizing".into(), at_inf_linear.to_string()]);
    table.push(vec!["s_inf_given".into(), at_inf_given.to_string()]);
    out.table = Some(table);
    Ok(out)
}

fn check_weak(inst: &Instance, opts: &Options) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let e = &inst.exponents;
    let alpha = weak_alpha(inst);
    let mut table = Table::new(&["quantity", "value"]);
    if inst.f.is_some() {
        let h = aggregate(inst)?;
        let weak = weak_norm(&h, e.q, &inst.mu).powf(1.0 / e.q);
        let sup = kolmogorov_level_sup(&h, e.q, alpha, &inst.mu)?;
        // ∫_E |h|^α ≤ q/(q-α) μ(E)^{1-α/q} ‖h‖_{q,∞}^α
        let constant = (e.q / (e.q - alpha)).powf(1.0 / alpha);
        out.line(format!("weak_norm = {weak}"));
        out.line(format!("kolmogorov_sup = {sup}"));
        let slack = 1e-12 * weak.max(1.0);
        out.require(sup >= weak - slack, "level sets attain the weak norm");
        out.require(
            sup <= constant * weak + slack,
            "Kolmogorov bound (q/(q-alpha))^(1/alpha)",
        );
        table.push(vec!["weak_norm".into(), weak.to_string()]);
        table.push(vec!["kolmogorov_sup".into(), sup.to_string()]);
    }
    let set = match &inst.weak {
        Some((_, Some(set))) => Some(set),
        _ => None,
    };
    if let Some(set) = set {
        if let (Some(g), Some((name, family))) = (&inst.g, inst.family(opts.family.as_deref())?) {
            let value = weak_cond1_value(
                &inst.lambda,
                &inst.sigma,
                &inst.mu,
                e,
                alpha,
                set,
                &family,
                g,
            )?;
            out.line(format!("weak_cond1({name}) = {value}"));
            table.push(vec!["weak_cond1".into(), value.to_string()]);
        }
        if let Some(beta) = &inst.beta {
            let value = weak_cond2_value(
                &inst.lambda,
                &inst.sigma,
                &inst.mu,
                e,
                alpha,
                set,
                beta,
                opts.variant,
                opts.reading,
            )?;
            out.line(format!("weak_cond2 = {value}"));
            table.push(vec!["weak_cond2".into(), value.to_string()]);
        }
    }
    if table.rows.is_empty() {
        return Err(missing("f", "(or weak.set with g or beta) for weak checks"));
    }
    out.table = Some(table);
    Ok(out)
}
