//! Verification runs over the exact engine, one subcommand per pipeline,
//! each emitting a JSON manifest. Exit code 0 means every residual was
//! zero, 1 names the first failing identity, 2 is a usage problem.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use qbrst_core::brst;
use qbrst_core::fock::HodgeContext;
use qbrst_core::glq::{self, build_instance, classical_algebra, classical_limit, IdentityReport};
use qbrst_core::ncring::NCPoly;
use qbrst_core::qla::{self, Model, QuantumLieAlgebra};
use qbrst_core::wedge::{compute_height, Height};
use qbrst_core::Scalar;

#[derive(Parser)]
#[command(name = "qbrst", version, about = "Exact checks for the quantum BRST calculus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArgs {
    /// Algebra to run against
    #[arg(long, default_value = "glq")]
    model: Model,
    /// Matrix size of the quantum group
    #[arg(long = "N", default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    n: u8,
}

#[derive(Args)]
struct OutArgs {
    /// Write the JSON manifest here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify the quantum Lie algebra axiom suite
    CheckAxioms {
        #[command(flatten)]
        model: ModelArgs,
        /// Read a (sigma, C) pair from JSON instead of the library
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Also write the constructed model as JSON
        #[arg(long)]
        dump_model: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Height of the braiding: first vanishing antisymmetrizer level
    Height {
        #[command(flatten)]
        model: ModelArgs,
        /// Search cap on the tower
        #[arg(long, default_value_t = 6)]
        max_degree: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Solve the coefficient recurrence level by level
    SolveX {
        #[command(flatten)]
        model: ModelArgs,
        /// Tower cap; defaults to the braiding height
        #[arg(long)]
        max_degree: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Assemble the BRST charge and emit it as JSON
    BuildQ {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Full BRST identity suite on the differential calculus
    VerifyGlq {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Anti-BRST identity suite
    VerifyQstar {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Laplacian, current and their commutation checks
    Laplacian {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Closed odd traces and their anticommutativity
    Cohomology {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// q = 1 algebra checks and the limit of the quantum charge
    ClassicalLimit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Harmonic decomposition ranks on small graded components
    Hodge {
        #[command(flatten)]
        model: ModelArgs,
        /// Rational specialization point, written as n/d
        #[arg(long, default_value = "3/2")]
        q0: String,
        /// Largest om degree of the scanned components
        #[arg(long, default_value_t = 2)]
        max_degree: usize,
        /// Decompose this state (JSON polynomial) as well
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Serialize)]
struct Check {
    name: String,
    residual_terms: usize,
    passed: bool,
    millis: u128,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    parameters: BTreeMap<String, String>,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Value::is_null")]
    artifacts: Value,
}

impl Manifest {
    fn new(command: &str, params: &[(&str, String)]) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            parameters: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            checks: Vec::new(),
            artifacts: Value::Null,
        }
    }

    fn push(&mut self, name: &str, residual_terms: usize, millis: u128) {
        self.checks.push(Check {
            name: name.into(),
            residual_terms,
            passed: residual_terms == 0,
            millis,
        });
    }

    fn absorb(&mut self, rep: &IdentityReport) {
        for e in &rep.entries {
            self.push(&e.name, e.residual_terms, e.millis);
        }
    }
}

fn usage(msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn finish(m: Manifest, out: &OutArgs) -> ExitCode {
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    match &out.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                return usage(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => println!("{text}"),
    }
    if let Some(bad) = m.checks.iter().find(|c| !c.passed) {
        eprintln!(
            "FAIL {} ({} residual terms)",
            bad.name, bad.residual_terms
        );
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn library(model: Model, n: usize) -> QuantumLieAlgebra {
    match model {
        Model::Sl2 => qla::sl2(),
        Model::Gl11 => qla::gl11(),
        Model::Glq => qla::derive_from_glq(n).expect("exchange solves are consistent"),
    }
}

fn model_params(m: &ModelArgs) -> Vec<(&'static str, String)> {
    vec![
        ("model", format!("{:?}", m.model).to_lowercase()),
        ("N", m.n.to_string()),
    ]
}

fn check_axioms(
    margs: &ModelArgs,
    input: &Option<PathBuf>,
    dump: &Option<PathBuf>,
    out: &OutArgs,
) -> ExitCode {
    let qla = match input {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<QuantumLieAlgebra>(&s).map_err(|e| e.to_string()))
        {
            Ok(q) => q,
            Err(e) => return usage(format!("cannot load model from {}: {e}", path.display())),
        },
        None => library(margs.model, margs.n as usize),
    };
    if let Some(path) = dump {
        let text = serde_json::to_string_pretty(&qla).expect("model serializes");
        if let Err(e) = std::fs::write(path, text) {
            return usage(format!("cannot write {}: {e}", path.display()));
        }
    }
    let mut m = Manifest::new("check-axioms", &model_params(margs));
    let t0 = Instant::now();
    let rep = qla.check_axioms();
    let mid = t0.elapsed().as_millis();
    for (name, count) in rep.residual_counts() {
        m.push(name, count, mid);
    }
    let ybe_ext = qla.extended_s_ybe_residual();
    m.push(
        "extended_s_ybe",
        ybe_ext.entries().count(),
        t0.elapsed().as_millis() - mid,
    );
    finish(m, out)
}

fn height_cmd(margs: &ModelArgs, cap: usize, out: &OutArgs) -> ExitCode {
    let qla = library(margs.model, margs.n as usize);
    let mut params = model_params(margs);
    params.push(("max_degree", cap.to_string()));
    let mut m = Manifest::new("height", &params);
    let t0 = Instant::now();
    match compute_height(&qla.sigma_expr(1, 2), cap) {
        Ok(Height::Found(h)) => {
            m.push("height_found", 0, t0.elapsed().as_millis());
            m.artifacts = json!({ "height": h });
            println!("height: {h}");
        }
        Ok(Height::ExceedsCap(c)) => {
            m.push("height_found", 1, t0.elapsed().as_millis());
            m.artifacts = json!({ "height": null, "cap": c });
        }
        Err(e) => return usage(format!("height computation failed: {e}")),
    }
    finish(m, out)
}

fn solve_x(margs: &ModelArgs, cap: Option<usize>, out: &OutArgs) -> ExitCode {
    let qla = library(margs.model, margs.n as usize);
    let cap = cap.unwrap_or(6);
    let mut params = model_params(margs);
    params.push(("max_degree", cap.to_string()));
    let mut m = Manifest::new("solve-x", &params);
    let t0 = Instant::now();
    let xt = match brst::build_x_tower(&qla, cap) {
        Ok(xt) => xt,
        Err(e) => return usage(format!("tower construction failed: {e}")),
    };
    let built = t0.elapsed().as_millis();
    m.push("tower_built", 0, built);
    for (r, res) in brst::verify_recurrence(&qla, &xt).iter().enumerate() {
        m.push(&format!("recurrence_level_{}", r + 1), res.support(), 0);
    }
    m.artifacts = json!({
        "height": xt.height(),
        "levels": xt.levels.iter().map(|l| json!({
            "provenance": serde_json::to_value(&l.provenance).unwrap(),
            "kernel_dim": l.kernel_dim,
            "support": l.x.entries().count(),
        })).collect::<Vec<_>>(),
        "tower": serde_json::to_value(&xt).unwrap(),
    });
    finish(m, out)
}

fn build_q(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let mut m = Manifest::new("build-q", &model_params(margs));
    let t0 = Instant::now();
    match margs.model {
        Model::Glq => {
            let inst = match build_instance(margs.n as usize) {
                Ok(i) => i,
                Err(e) => return usage(format!("instance construction failed: {e}")),
            };
            match inst.build_q() {
                Ok(q) => {
                    m.push("charge_assembled", 0, t0.elapsed().as_millis());
                    m.artifacts = json!({
                        "terms": q.terms.len(),
                        "series_truncation_exact": inst.series_truncation_exact(),
                        "q": q.to_json(&inst.rels.alphabet),
                    });
                }
                Err(e) => {
                    eprintln!("charge assembly failed: {e}");
                    m.push("charge_assembled", 1, t0.elapsed().as_millis());
                }
            }
        }
        _ => {
            let qla = library(margs.model, margs.n as usize);
            let xt = match brst::build_x_tower(&qla, 6) {
                Ok(xt) => xt,
                Err(e) => return usage(format!("tower construction failed: {e}")),
            };
            let q = brst::assemble_q_abstract(qla.n_gen, &xt);
            let alph = brst::abstract_alphabet(qla.n_gen);
            m.push("charge_assembled", 0, t0.elapsed().as_millis());
            m.artifacts = json!({
                "terms": q.terms.len(),
                "q": q.to_json(&alph),
            });
        }
    }
    finish(m, out)
}

fn glq_only(margs: &ModelArgs, what: &str) -> Result<glq::GlqInstance, ExitCode> {
    if margs.model != Model::Glq {
        return Err(usage(format!("{what} only applies to --model glq")));
    }
    build_instance(margs.n as usize)
        .map_err(|e| usage(format!("instance construction failed: {e}")))
}

fn with_charge(
    margs: &ModelArgs,
    what: &str,
) -> Result<(glq::GlqInstance, NCPoly), ExitCode> {
    let inst = glq_only(margs, what)?;
    let q = inst
        .build_q()
        .map_err(|e| usage(format!("charge assembly failed: {e}")))?;
    Ok((inst, q))
}

fn verify_glq(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let (inst, q) = match with_charge(margs, "verify-glq") {
        Ok(v) => v,
        Err(c) => return c,
    };
    let mut m = Manifest::new("verify-glq", &model_params(margs));
    match inst.verify_brst_identities(&q) {
        Ok(rep) => m.absorb(&rep),
        Err(e) => return usage(format!("suite failed to run: {e}")),
    }
    m.artifacts = json!({ "q_terms": q.terms.len() });
    finish(m, out)
}

fn verify_qstar(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let inst = match glq_only(margs, "verify-qstar") {
        Ok(i) => i,
        Err(c) => return c,
    };
    let qstar = inst.build_qstar();
    let mut m = Manifest::new("verify-qstar", &model_params(margs));
    match inst.verify_qstar_identities(&qstar) {
        Ok(rep) => m.absorb(&rep),
        Err(e) => return usage(format!("suite failed to run: {e}")),
    }
    m.artifacts = json!({ "qstar_terms": qstar.terms.len() });
    finish(m, out)
}

fn laplacian(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let (inst, q) = match with_charge(margs, "laplacian") {
        Ok(v) => v,
        Err(c) => return c,
    };
    let qstar = inst.build_qstar();
    let mut m = Manifest::new("laplacian", &model_params(margs));
    match inst.verify_laplacian_identities(&q, &qstar) {
        Ok((delta, rep)) => {
            m.absorb(&rep);
            m.artifacts = json!({ "delta_terms": delta.terms.len() });
        }
        Err(e) => return usage(format!("suite failed to run: {e}")),
    }
    finish(m, out)
}

fn cohomology(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let (inst, q) = match with_charge(margs, "cohomology") {
        Ok(v) => v,
        Err(c) => return c,
    };
    let mut m = Manifest::new("cohomology", &model_params(margs));
    let gens = inst.cohomology_generators();
    m.absorb(&inst.verify_cohomology(&q));
    m.artifacts = json!({
        "generators": gens.iter().enumerate().map(|(i, g)| json!({
            "degree": 2 * i + 1,
            "terms": g.terms.len(),
        })).collect::<Vec<_>>(),
    });
    finish(m, out)
}

fn classical(margs: &ModelArgs, out: &OutArgs) -> ExitCode {
    let (inst, q) = match with_charge(margs, "classical-limit") {
        Ok(v) => v,
        Err(c) => return c,
    };
    let mut m = Manifest::new("classical-limit", &model_params(margs));
    let ca = match classical_algebra(margs.n as usize) {
        Ok(ca) => ca,
        Err(e) => return usage(format!("classical algebra failed: {e}")),
    };
    m.absorb(&ca.verify());
    let t0 = Instant::now();
    match classical_limit(&inst, &q, &ca) {
        Ok(limit) => {
            let residual = ca.rels.normal_form(&limit.sub(&ca.build_q()));
            m.push(
                "limit_of_quantum_charge",
                residual.terms.len(),
                t0.elapsed().as_millis(),
            );
        }
        Err(e) => return usage(format!("classical limit failed: {e}")),
    }
    finish(m, out)
}

fn hodge(
    margs: &ModelArgs,
    q0str: &str,
    max_degree: usize,
    input: &Option<PathBuf>,
    out: &OutArgs,
) -> ExitCode {
    let Ok(q0) = BigRational::from_str(q0str) else {
        return usage(format!("--q0 expects a rational like 3/2, got {q0str:?}"));
    };
    let inst = match glq_only(margs, "hodge") {
        Ok(i) => i,
        Err(c) => return c,
    };
    let ctx = match HodgeContext::new(&inst) {
        Ok(c) => c,
        Err(e) => return usage(format!("operator assembly failed: {e}")),
    };
    let mut params = model_params(margs);
    params.push(("q0", q0str.to_string()));
    params.push(("max_degree", max_degree.to_string()));
    let mut m = Manifest::new("hodge", &params);
    let mut summaries = Vec::new();
    for t in 0..=1usize {
        for w in 0..=max_degree {
            let t0 = Instant::now();
            match ctx.rank_summary(t, w, &q0) {
                Ok(rs) => {
                    m.push(
                        &format!("component_{t}_{w}_splits"),
                        if rs.direct_sum() { 0 } else { 1 },
                        t0.elapsed().as_millis(),
                    );
                    summaries.push(serde_json::to_value(&rs).unwrap());
                }
                Err(e) => return usage(format!("component ({t}, {w}): {e}")),
            }
        }
    }
    let mut artifacts = json!({ "components": summaries });
    if let Some(path) = input {
        let state = match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|s| {
                serde_json::from_str::<Value>(&s)
                    .map_err(|e| e.to_string())
                    .and_then(|v| {
                        NCPoly::from_json(&v, &inst.rels.alphabet).map_err(|e| e.to_string())
                    })
            }) {
            Ok(p) => p,
            Err(e) => return usage(format!("cannot load state from {}: {e}", path.display())),
        };
        let Some(word) = state.terms.keys().next() else {
            return usage("the input state is zero".into());
        };
        let t_deg = word.iter().filter(|l| l.fam == glq::FAM_T).count();
        let w_deg = word.len() - t_deg;
        let t0 = Instant::now();
        match ctx.decompose(&state, t_deg, w_deg, &q0) {
            Ok(d) => {
                let evaluated = eval_poly(&state, &q0);
                let back = d.harmonic.add(&d.q_exact).add(&d.qstar_exact);
                m.push(
                    "decomposition_round_trip",
                    back.sub(&evaluated).terms.len(),
                    t0.elapsed().as_millis(),
                );
                artifacts["decomposition"] = d.to_json(&inst.rels.alphabet);
            }
            Err(e) => return usage(format!("decomposition failed: {e}")),
        }
    }
    m.artifacts = artifacts;
    finish(m, out)
}

fn eval_poly(p: &NCPoly, q0: &BigRational) -> NCPoly {
    let mut out = NCPoly::zero();
    for (w, c) in &p.terms {
        let v = c.eval_at(q0).expect("state coefficients are regular at q0");
        out.add_term(w.clone(), Scalar::from_rational(&v));
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::CheckAxioms {
            model,
            input,
            dump_model,
            out,
        } => check_axioms(model, input, dump_model, out),
        Cmd::Height {
            model,
            max_degree,
            out,
        } => height_cmd(model, *max_degree, out),
        Cmd::SolveX {
            model,
            max_degree,
            out,
        } => solve_x(model, *max_degree, out),
        Cmd::BuildQ { model, out } => build_q(model, out),
        Cmd::VerifyGlq { model, out } => verify_glq(model, out),
        Cmd::VerifyQstar { model, out } => verify_qstar(model, out),
        Cmd::Laplacian { model, out } => laplacian(model, out),
        Cmd::Cohomology { model, out } => cohomology(model, out),
        Cmd::ClassicalLimit { model, out } => classical(model, out),
        Cmd::Hodge {
            model,
            q0,
            max_degree,
            input,
            out,
        } => hodge(model, q0, *max_degree, input, out),
    }
}
