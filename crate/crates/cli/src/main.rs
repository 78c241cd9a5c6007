mod args;
mod report;

use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use khintchine::coeffs::CoefficientVector;
use khintchine::dist::Distribution;
use khintchine::entropy::{self, Driver, FieldModel, FiniteMetricSpace};
use khintchine::genfun::{self, default_p_grid, GeneratingFunction, KappaConfig, PsiMode};
use khintchine::khinch::{self, NormSpec, SearchConfig, TrialConfig};
use khintchine::norms::{self, EngineConfig, IndependentSum, LambdaGrid};
use khintchine::{Error, Result};

use args::{Cli, Command, EntropyCmd, Global, KhinchineCmd, NormCmd, PhiCmd, PhiSpec, VerifyCmd};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok((result, code)) => match report::emit(&cli, result, code) {
            Ok(()) => ExitCode::from(code as u8),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn engine(g: &Global) -> Result<EngineConfig> {
    Ok(EngineConfig {
        engine: g.engine.parse()?,
        budget: g.budget,
        samples: g.samples,
        seed: g.seed,
    })
}

fn law(spec: &str) -> Result<Distribution> {
    spec.parse()
}

fn phi_of(spec: &PhiSpec) -> Result<GeneratingFunction> {
    let law = spec.law.as_deref().map(law).transpose()?;
    GeneratingFunction::parse(&spec.family, law.as_ref())
}

/// Splits a comma-separated list of specs. A piece that does not start with
/// a letter or `{` continues the previous spec, so `discrete:-1,1@0.5,0.5`
/// and `tabulated:1/0.5,2/2` stay whole.
fn split_specs(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in list.split(',') {
        let starts_spec = piece
            .trim_start()
            .starts_with(|c: char| c.is_ascii_alphabetic() || c == '{');
        match out.last_mut() {
            Some(last) if !starts_spec => {
                last.push(',');
                last.push_str(piece);
            }
            _ => out.push(piece.trim().to_string()),
        }
    }
    out
}

fn numbers(field: &'static str, list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::Parse {
                field,
                reason: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

fn trials(g: &Global, trials: usize) -> TrialConfig {
    TrialConfig {
        trials,
        seed: g.seed,
        ..Default::default()
    }
}

fn kappa_config(g: &Global, n_max: usize) -> KappaConfig {
    KappaConfig {
        n_max,
        restarts: g.restarts,
        seed: g.seed,
    }
}

fn run(cli: &Cli) -> Result<(Value, i32)> {
    let g = &cli.global;
    match &cli.command {
        Command::Phi(cmd) => Ok((phi_cmd(g, cmd)?, 0)),
        Command::Norm(cmd) => Ok((norm_cmd(g, cmd)?, 0)),
        Command::Khinchine(cmd) => Ok((khinchine_cmd(g, cmd)?, 0)),
        Command::Verify(cmd) => {
            let rep = verify_cmd(g, cmd)?;
            let code = rep.exit_code();
            Ok((to_value(&rep), code))
        }
        Command::Entropy(cmd) => Ok((entropy_cmd(g, cmd)?, 0)),
    }
}

fn phi_cmd(g: &Global, cmd: &PhiCmd) -> Result<Value> {
    Ok(match cmd {
        PhiCmd::Eval { phi, lambda } => {
            let f = phi_of(phi)?;
            json!({ "phi": f, "lambda": lambda, "value": f.eval(*lambda) })
        }
        PhiCmd::Legendre { phi, u } => to_value(&phi_of(phi)?.legendre(*u)),
        PhiCmd::Convclass { phi, r } => to_value(&phi_of(phi)?.conv_r_class(*r)?),
        PhiCmd::Overline { phi, lambda } => to_value(&phi_of(phi)?.overline(*lambda)?),
        PhiCmd::Kappa { phis, lambda } => {
            let phis = split_specs(phis)
                .iter()
                .map(|s| GeneratingFunction::parse(s, None))
                .collect::<Result<Vec<_>>>()?;
            to_value(&genfun::kappa(&phis, *lambda, &kappa_config(g, g.nmax))?)
        }
        PhiCmd::Psi { phi, pmax, mode } => {
            let mode = match mode.as_str() {
                "inverse" => PsiMode::Inverse,
                "literal" => PsiMode::Literal,
                other => {
                    return Err(Error::Parse {
                        field: "mode",
                        reason: format!("expected inverse or literal, got `{other}`"),
                    })
                }
            };
            to_value(&phi_of(phi)?.psi(&default_p_grid(*pmax), mode)?)
        }
        PhiCmd::Tail { phi, tau, u } => json!({ "value": phi_of(phi)?.tail_envelope(*tau, *u)? }),
    })
}

fn weighted(law_spec: &str, weights: &str) -> Result<(Distribution, CoefficientVector, IndependentSum)> {
    let d = law(law_spec)?;
    let a: CoefficientVector = weights.parse()?;
    let sum = IndependentSum::weighted(&d, &a);
    Ok((d, a, sum))
}

fn norm_cmd(g: &Global, cmd: &NormCmd) -> Result<Value> {
    let cfg = engine(g)?;
    Ok(match cmd {
        NormCmd::Bphi { law, phi, weights } => {
            let (d, _, sum) = weighted(law, weights)?;
            let phi = GeneratingFunction::parse(phi, Some(&d))?;
            to_value(&norms::bphi_norm(&sum, &phi, &LambdaGrid::default())?)
        }
        NormCmd::Lp { law, p, weights } => {
            let (_, _, sum) = weighted(law, weights)?;
            to_value(&norms::sum_lp(&sum, *p, &cfg)?)
        }
        NormCmd::Gls { law, psi, weights } => {
            let (d, _, sum) = weighted(law, weights)?;
            let spec = NormSpec::parse(&format!("gls:{psi}"), Some(&d))?;
            to_value(&spec.evaluate(&sum, &cfg)?)
        }
    })
}

fn khinchine_cmd(g: &Global, cmd: &KhinchineCmd) -> Result<Value> {
    let cfg = SearchConfig {
        n_max: g.nmax,
        restarts: g.restarts,
        seed: g.seed,
        engine: engine(g)?,
        ..Default::default()
    };
    let (args, which) = match cmd {
        KhinchineCmd::Sup(a) => (a, "sup"),
        KhinchineCmd::Inf(a) => (a, "inf"),
        KhinchineCmd::Prelim(a) => (a, "prelim"),
    };
    let d = law(&args.law)?;
    let spec = NormSpec::parse(&args.norm, Some(&d))?;
    Ok(match which {
        "sup" => to_value(&khinch::khinchine_sup(&d, &spec, &cfg)?),
        "inf" => to_value(&khinch::khinchine_inf(&d, &spec, &cfg)?),
        _ => to_value(&khinch::prelim_bounds(&d, &spec, &cfg.engine)?),
    })
}

fn verify_cmd(g: &Global, cmd: &VerifyCmd) -> Result<khinch::VerifyReport> {
    let cfg = engine(g)?;
    match cmd {
        VerifyCmd::Thm31 { law: l, phi, trials: t } => {
            let d = law(l)?;
            let phi = GeneratingFunction::parse(phi, Some(&d))?;
            khinch::verify_thm31(&d, &phi, &trials(g, *t))
        }
        VerifyCmd::Thm32 { law: l, phi, trials: t } => {
            let d = law(l)?;
            let phi = GeneratingFunction::parse(phi, Some(&d))?;
            khinch::verify_thm32(&d, &phi, &trials(g, *t), &kappa_config(g, 2 * g.nmax))
        }
        VerifyCmd::Thm41 { laws, phis, trials: t } => {
            let laws = split_specs(laws).iter().map(|s| law(s)).collect::<Result<Vec<_>>>()?;
            let specs = split_specs(phis);
            if specs.len() != 1 && specs.len() != laws.len() {
                return Err(Error::Parse {
                    field: "phis",
                    reason: format!("{} phi specs for {} laws", specs.len(), laws.len()),
                });
            }
            let phis = laws
                .iter()
                .enumerate()
                .map(|(k, d)| GeneratingFunction::parse(&specs[k % specs.len()], Some(d)))
                .collect::<Result<Vec<_>>>()?;
            let tc = trials(g, *t);
            khinch::verify_thm41(&laws, &phis, &tc, &kappa_config(g, 4 * tc.n_cap))
        }
        VerifyCmd::Thm51 {
            law: l,
            p,
            weights,
            psi,
        } => {
            let (d, a, _) = weighted(l, weights)?;
            let psi = match psi.as_str() {
                "moments" => None,
                other => match NormSpec::parse(&format!("gls:{other}"), Some(&d))? {
                    NormSpec::Gls { psi, .. } => Some(psi),
                    _ => unreachable!(),
                },
            };
            khinch::rosenthal_verify("thm51", &d, *p, &a, psi.as_ref(), &cfg)
        }
        VerifyCmd::Rosenthal { law: l, p, weights } => {
            let (d, a, _) = weighted(l, weights)?;
            khinch::rosenthal_verify("rosenthal", &d, *p, &a, None, &cfg)
        }
        VerifyCmd::Pythagoras { laws, phi, trials: t } => {
            let laws = split_specs(laws).iter().map(|s| law(s)).collect::<Result<Vec<_>>>()?;
            let phi = GeneratingFunction::parse(phi, laws.first())?;
            khinch::pythagoras_check(&phi, &laws, &trials(g, *t))
        }
        VerifyCmd::Tail {
            law: l,
            weights,
            phi,
            u,
        } => {
            let (d, a, _) = weighted(l, weights)?;
            let phi = GeneratingFunction::parse(phi, Some(&d))?;
            khinch::tail_compare(&d, &a, &phi, &numbers("u", u)?, &cfg)
        }
    }
}

fn entropy_cmd(g: &Global, cmd: &EntropyCmd) -> Result<Value> {
    Ok(match cmd {
        EntropyCmd::Cover { space, eps } => {
            let s = FiniteMetricSpace::from_path(space)?;
            to_value(&entropy::covering_number(&s, *eps)?)
        }
        EntropyCmd::Profile { space, eps } => {
            let s = FiniteMetricSpace::from_path(space)?;
            let grid = match eps {
                Some(e) => numbers("eps", e)?,
                None => s.distances(),
            };
            to_value(&entropy::entropy_profile(&s, &grid)?)
        }
        EntropyCmd::Dudley {
            space,
            scale,
            eps_steps,
        } => {
            let s = FiniteMetricSpace::from_path(space)?;
            to_value(&entropy::dudley_integral(&s, *scale, *eps_steps)?)
        }
        EntropyCmd::Field {
            model,
            orthonormal,
            driver,
            weights,
            eps_steps,
        } => {
            let driver = match driver.as_str() {
                "gaussian" => Driver::Gaussian,
                "rademacher" => Driver::Rademacher,
                other => {
                    return Err(Error::Parse {
                        field: "driver",
                        reason: format!("expected gaussian or rademacher, got `{other}`"),
                    })
                }
            };
            let model = match (model, orthonormal) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    let m: FieldModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
                        field: "model",
                        reason: e.to_string(),
                    })?;
                    FieldModel::new(m.features, m.driver)?
                }
                (None, Some(k)) => FieldModel::orthonormal(*k, driver)?,
                (None, None) => {
                    return Err(Error::Parse {
                        field: "model",
                        reason: "give --model FILE or --orthonormal K".into(),
                    })
                }
            };
            let sets = weights
                .split(';')
                .map(|w| w.trim().parse::<CoefficientVector>())
                .collect::<Result<Vec<_>>>()?;
            to_value(&entropy::field_sup_stats(&model, &sets, g.samples, g.seed, *eps_steps)?)
        }
    })
}
