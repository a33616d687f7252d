use covlab::diagnostics::{NuSequence, NuSource};
use covlab::experiments::NuSpec;
use covlab::minimax_testbed::{
    assouad_terms, build_f1_banded, build_f2_family, build_f3_family, certify_sparse_membership,
    BandedFamilySpec, CertificateReport, Check, Family, SparseFamilySpec, DEFAULT_MC_SAMPLES,
};
use covlab::rng::mix_seed;
use log::info;

use super::resolve_seed;
use crate::error::{CliError, CliResult};
use crate::{FamilyClass, MinimaxArgs};

const DEFAULT_NU: &str = "power:0.5";
const PAIR_LABEL: u64 = 0x5041_4952;

/// Worst case of one named check over the sampled members.
struct Aggregate {
    passed: usize,
    total: usize,
    worst: Check,
}

fn aggregate(reports: &[CertificateReport]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    for report in reports {
        for check in &report.checks {
            match out.iter_mut().find(|a| a.worst.name == check.name) {
                Some(a) => {
                    a.total += 1;
                    a.passed += check.passed as usize;
                    if check.slack < a.worst.slack {
                        a.worst = check.clone();
                    }
                }
                None => out.push(Aggregate {
                    passed: check.passed as usize,
                    total: 1,
                    worst: check.clone(),
                }),
            }
        }
    }
    out
}

fn banded_spec(a: &MinimaxArgs) -> CliResult<BandedFamilySpec> {
    let nu = match NuSpec::parse(a.nu.as_deref().unwrap_or(DEFAULT_NU))? {
        NuSpec::Source(s) => s,
        NuSpec::Numeric => {
            return Err(CliError::usage(
                "--nu numeric needs a kernel; give a closed form",
            ))
        }
    };
    let desk = BandedFamilySpec::desk(NuSequence::new(nu)?);
    Ok(BandedFamilySpec::new(
        a.r.unwrap_or(desk.r),
        a.n_samples.unwrap_or(desk.n_samples),
        a.dim.unwrap_or(desk.dim),
        a.w.unwrap_or(desk.w),
        a.tau.unwrap_or(desk.tau),
        desk.nu,
    )?)
}

fn sparse_spec(a: &MinimaxArgs) -> CliResult<SparseFamilySpec> {
    let foreign = [
        ("--r", a.r.is_some()),
        ("--tau", a.tau.is_some()),
        ("--d", a.dim.is_some()),
        ("--w", a.w.is_some()),
        ("--nu", a.nu.is_some()),
    ];
    if let Some((flag, _)) = foreign.iter().find(|(_, set)| *set) {
        return Err(CliError::usage(format!(
            "{flag} does not apply to the sparse family"
        )));
    }
    let mut spec = SparseFamilySpec::default();
    if let Some(n) = a.n_samples {
        spec.n_samples = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn nu_label(spec: &BandedFamilySpec) -> String {
    match spec.nu.source() {
        NuSource::PowerLaw { alpha } => format!("power:{alpha}"),
        other => NuSpec::Source(other.clone()).to_string(),
    }
}

fn print_aggregates(label: &str, aggs: &[Aggregate]) {
    for a in aggs {
        let c = &a.worst;
        println!(
            "{label}.{} pass={}/{} worst_value={} bound={} min_slack={}",
            c.name, a.passed, a.total, c.value, c.bound, c.slack
        );
    }
}

pub fn minimax_check(a: &MinimaxArgs) -> CliResult<()> {
    let seed = resolve_seed(Some(a.seed), a.seed)?;
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    let mut all_pass = true;
    let family = match a.class {
        FamilyClass::F1 => {
            let spec = banded_spec(a)?;
            info!(
                "resolved: class=f1 r={} N={} d={} w={} tau={} nu={}",
                spec.r,
                spec.n_samples,
                spec.dim,
                spec.w,
                spec.tau,
                nu_label(&spec)
            );
            let report = build_f1_banded(&spec)?.certify()?;
            print!("{report}");
            return finish(report.all_passed());
        }
        FamilyClass::F2 | FamilyClass::F3 => {
            let spec = banded_spec(a)?;
            let fam = if a.class == FamilyClass::F2 {
                build_f2_family(&spec)?
            } else {
                build_f3_family(&spec)?
            };
            let class = format!("{:?}", a.class).to_lowercase();
            info!(
                "resolved: class={class} r={} N={} d={} w={} tau={} nu={} m_star={} samples={} pairs={} seed={seed}",
                spec.r, spec.n_samples, spec.dim, spec.w, spec.tau, nu_label(&spec),
                fam.m_star(), a.samples, a.pairs
            );
            Family::Banded(fam)
        }
        FamilyClass::Sparse => {
            let spec = sparse_spec(a)?;
            info!(
                "resolved: class=sparse q={} gamma1={} gamma2={} N={} beta={} M={} nu={} r={} ell={} samples={} pairs={} mc_samples={} seed={seed}",
                spec.q, spec.gamma1, spec.gamma2, spec.n_samples, spec.beta, spec.m_const, spec.nu,
                spec.r(), spec.ell(), a.samples, a.pairs, a.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES)
            );
            Family::Sparse(spec)
        }
    };
    let label = family.label();
    let mc = a.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let mut reports = Vec::with_capacity(a.samples);
    for k in 0..a.samples {
        let s = mix_seed(seed, &[k as u64]);
        let theta = family.random_theta(s);
        let report = match &family {
            Family::Banded(f) => f.certify(&theta)?,
            Family::Sparse(spec) => certify_sparse_membership(spec, &theta, mc, s)?,
        };
        if a.verbose {
            print!("{report}");
        }
        reports.push(report);
    }
    all_pass &= reports.iter().all(CertificateReport::all_passed);
    print_aggregates(label, &aggregate(&reports));

    if a.pairs > 0 {
        let pairs = family.random_neighbour_pairs(a.pairs, mix_seed(seed, &[PAIR_LABEL]));
        let assouad = assouad_terms(&family, &pairs)?;
        println!("{label}.assouad.pairs={}", assouad.pairs);
        println!("{label}.assouad.unit_pairs={}", assouad.unit_pairs);
        println!("{label}.assouad.alpha_min={}", assouad.alpha_min);
        if let Some(kl) = assouad.worst_kl {
            println!("{label}.assouad.worst_kl={kl}");
        }
        if let Some(f) = assouad.worst_frobenius_sq {
            println!("{label}.assouad.worst_frobenius_sq={f}");
        }
        print!("{}", assouad.certificate);
        all_pass &= assouad.certificate.all_passed();
    }
    finish(all_pass)
}

fn finish(all_pass: bool) -> CliResult<()> {
    println!("all_pass={all_pass}");
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Numeric("some certificate checks failed".into()))
    }
}
