use std::io::Write;

use anyhow::Result;
use clap::Args;
use dbcd_core::block::node_stream;
use dbcd_core::eso::expected_theta_squared;
use dbcd_core::eso::verify::{enumerate_theta_squared, verify_eso, verify_sampling_identity, EsoMode, QuadraticObjective};
use dbcd_core::{Partition, PartitionScheme};
use rand::Rng;
use serde_json::json;

const TOL: f64 = 1e-10;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Sampling identity for kappa = 1, theta, i * theta^2.
    #[arg(long)]
    pub lemma1: bool,
    /// Closed-form second moment of |Z ∩ J| against enumeration.
    #[arg(long)]
    pub theta: bool,
    /// ESO inequality on random partially separable quadratics.
    #[arg(long)]
    pub eso: bool,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long = "C", default_value_t = 2)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub tau: usize,
    /// Random configurations for --eso.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Groups meeting every node in exactly `xi` blocks: the first `xi` and the last `xi` of each.
fn even_groups(partition: &Partition, xi: usize) -> Vec<Vec<usize>> {
    let head = partition.groups().iter().flat_map(|g| g[..xi].to_vec()).collect();
    let tail = partition.groups().iter().flat_map(|g| g[g.len() - xi..].to_vec()).collect();
    vec![head, tail]
}

struct Tally<'a, W: Write> {
    out: &'a mut W,
    passed: usize,
    failed: usize,
}

impl<W: Write> Tally<'_, W> {
    fn emit(&mut self, pass: bool, mut line: serde_json::Value) -> Result<()> {
        line["pass"] = json!(pass);
        writeln!(self.out, "{line}")?;
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        Ok(())
    }
}

fn lemma1<W: Write>(args: &VerifyArgs, partition: &Partition, t: &mut Tally<W>) -> Result<()> {
    let kappas: [(&str, fn(usize, usize) -> f64); 3] = [
        ("one", |_, _| 1.0),
        ("theta", |th, _| th as f64),
        ("i_theta_sq", |th, i| (i * th * th) as f64),
    ];
    for xi in 1..=partition.group_size() {
        for group in even_groups(partition, xi) {
            for (name, kappa) in kappas {
                let c = verify_sampling_identity(partition, &group, args.tau, kappa)?;
                let line = json!({"check": "lemma1", "xi": xi, "group": group, "kappa": name, "lhs": c.lhs, "rhs": c.rhs});
                t.emit(c.holds(TOL), line)?;
            }
        }
    }
    Ok(())
}

fn theta<W: Write>(args: &VerifyArgs, partition: &Partition, t: &mut Tally<W>) -> Result<()> {
    let s = partition.group_size();
    for xi in 1..=s {
        let group = &even_groups(partition, xi)[0];
        let closed = expected_theta_squared(xi, args.tau, s, args.nodes)?;
        let enumerated = enumerate_theta_squared(partition, group, args.tau)?;
        let pass = (closed - enumerated).abs() <= TOL * closed.abs().max(1.0);
        t.emit(pass, json!({"check": "theta", "xi": xi, "closed_form": closed, "enumerated": enumerated}))?;
    }
    Ok(())
}

fn eso<W: Write>(args: &VerifyArgs, partition: &Partition, t: &mut Tally<W>) -> Result<()> {
    let mut rng = node_stream(args.seed, 0);
    for trial in 0..args.trials {
        let extra = rng.random_range(0..=args.n);
        let max_group = rng.random_range(1..=args.n);
        let obj = QuadraticObjective::random(args.n, extra, max_group, &mut rng);
        let x: Vec<f64> = (0..args.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..args.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = verify_eso(&obj, partition, args.tau, &x, &h, EsoMode::Exhaustive)?;
        t.emit(r.holds, json!({"check": "eso", "trial": trial, "lhs": r.lhs, "rhs": r.rhs, "beta": r.beta}))?;
    }
    Ok(())
}

pub fn run(args: &VerifyArgs) -> Result<()> {
    let all = !(args.lemma1 || args.theta || args.eso);
    let partition = Partition::balanced(args.n, args.nodes, PartitionScheme::Contiguous)?;
    let mut stdout = crate::output(None)?;
    let mut tally = Tally {
        out: &mut stdout,
        passed: 0,
        failed: 0,
    };
    if all || args.lemma1 {
        lemma1(args, &partition, &mut tally)?;
    }
    if all || args.theta {
        theta(args, &partition, &mut tally)?;
    }
    if all || args.eso {
        eso(args, &partition, &mut tally)?;
    }
    let (passed, failed) = (tally.passed, tally.failed);
    writeln!(stdout, "{}", json!({"summary": true, "passed": passed, "failed": failed}))?;
    stdout.flush()?;
    if failed > 0 {
        return Err(crate::Exit {
            code: 3,
            message: format!("{failed} verification checks failed"),
        }
        .into());
    }
    Ok(())
}
