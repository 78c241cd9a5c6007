use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "khintchine",
    version,
    about = "B(phi) and GLS norms, Khintchine constants and inequality checks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo draws.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub samples: usize,
    /// auto, exact_enum, convolution, monte_carlo or quadrature.
    #[arg(long, global = true, default_value = "auto")]
    pub engine: String,
    /// State budget for exact enumeration and convolution.
    #[arg(long, global = true, default_value_t = 1 << 22)]
    pub budget: usize,
    #[arg(long, global = true, default_value_t = 32)]
    pub nmax: usize,
    #[arg(long, global = true, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[serde(skip)]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[serde(skip)]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generating-function calculus.
    #[command(subcommand)]
    Phi(PhiCmd),
    /// Norms of a single law or weighted sum.
    #[command(subcommand)]
    Norm(NormCmd),
    /// Khintchine constant searches.
    #[command(subcommand)]
    Khinchine(KhinchineCmd),
    /// Verification suites (exit 0 pass, 1 violation, 2 refusal).
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Metric entropy and the field simulator.
    #[command(subcommand)]
    Entropy(EntropyCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct PhiSpec {
    /// subgaussian, power:M, natural[:LAW], tabulated:L/V,.. or JSON.
    #[arg(long, visible_alias = "phi", default_value = "subgaussian")]
    pub family: String,
    /// Law for `natural`.
    #[arg(long)]
    pub law: Option<String>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiCmd {
    /// phi(lambda).
    Eval {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long)]
        lambda: f64,
    },
    /// Legendre transform phi*(u) and its maximizer.
    Legendre {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long)]
        u: f64,
    },
    /// Is t -> phi(t^(1/r)) convex? Reports a witness when not.
    Convclass {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
    },
    /// sup_n n phi(lambda / sqrt n).
    Overline {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long)]
        lambda: f64,
    },
    /// Lower estimate of sup_a sum_k phi_k(a_k lambda) over unit vectors.
    Kappa {
        /// Comma-separated phi specs; phi_k cycles through them.
        #[arg(long)]
        phis: String,
        #[arg(long)]
        lambda: f64,
    },
    /// Moment function psi derived from phi.
    Psi {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long, default_value_t = 16)]
        pmax: usize,
        /// inverse: phi^{-1}(p); literal: phi^{-1}(p)/p.
        #[arg(long, default_value = "inverse")]
        mode: String,
    },
    /// Tail envelope exp(-phi*(u / tau)).
    Tail {
        #[command(flatten)]
        phi: PhiSpec,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        u: f64,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormCmd {
    /// B(phi) norm of a law or weighted sum.
    Bphi {
        #[arg(long)]
        law: String,
        #[arg(long, default_value = "subgaussian")]
        phi: String,
        #[arg(long, default_value = "onehot")]
        weights: String,
    },
    /// L_p norm of a weighted sum.
    Lp {
        #[arg(long)]
        law: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value = "onehot")]
        weights: String,
    },
    /// Grand Lebesgue norm sup_p ||X||_p / psi(p).
    Gls {
        #[arg(long)]
        law: String,
        /// sqrt, const, power:M or moments.
        #[arg(long, default_value = "sqrt")]
        psi: String,
        #[arg(long, default_value = "onehot")]
        weights: String,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub law: String,
    /// lp:P, gls:PSI or bphi:PHI.
    #[arg(long)]
    pub norm: String,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KhinchineCmd {
    /// Lower estimate of the sup over unit coefficient vectors.
    Sup(SearchArgs),
    /// Upper estimate of the inf over unit coefficient vectors.
    Inf(SearchArgs),
    /// Gaussian comparison bounds for the constants.
    Prelim(SearchArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCmd {
    /// MGF of a weighted sum against phi(lambda ||xi||), phi in Conv_2.
    Thm31 {
        #[arg(long)]
        law: String,
        #[arg(long, default_value = "subgaussian")]
        phi: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// B(phi) norm of weighted sums against the kappa bound.
    Thm32 {
        #[arg(long)]
        law: String,
        #[arg(long, default_value = "subgaussian")]
        phi: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Product MGF of non-identical terms against exp(kappa(lambda)).
    Thm41 {
        /// Comma-separated laws; xi_k cycles through them.
        #[arg(long)]
        laws: String,
        /// One phi spec per law; `natural` takes the matching law.
        #[arg(long)]
        phis: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Moment bound through the Rosenthal-scaled GLS norm.
    Thm51 {
        #[arg(long)]
        law: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value = "onehot")]
        weights: String,
        /// sqrt, const, power:M or moments (default).
        #[arg(long, default_value = "moments")]
        psi: String,
    },
    /// ||S||_p against C(p) max(||a||_2 ||xi||_2, ||a||_p ||xi||_p).
    Rosenthal {
        #[arg(long)]
        law: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value = "onehot")]
        weights: String,
    },
    /// ||sum X_k||^2 <= sum ||X_k||^2 in B(phi).
    Pythagoras {
        #[arg(long, default_value = "gaussian:1,rademacher")]
        laws: String,
        #[arg(long, default_value = "subgaussian")]
        phi: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Survival function against the tail envelope.
    Tail {
        #[arg(long)]
        law: String,
        #[arg(long, default_value = "onehot")]
        weights: String,
        #[arg(long, default_value = "subgaussian")]
        phi: String,
        #[arg(long, default_value = "0.5,1,1.5,2,2.5,3")]
        u: String,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyCmd {
    /// Covering number at radius eps.
    Cover {
        /// Metric space, CSV or JSON.
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Metric entropy H(eps) = ln N(eps) over a grid.
    Profile {
        #[arg(long)]
        space: PathBuf,
        /// Comma-separated radii; defaults to the pairwise distances.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Dudley entropy integral.
    Dudley {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 256)]
        eps_steps: usize,
    },
    /// Moments of the supremum of a finite random field.
    Field {
        /// FieldModel JSON {"features": [[..]], "driver": ..}.
        #[arg(long, conflicts_with = "orthonormal")]
        model: Option<PathBuf>,
        /// Use k points with orthonormal feature rows.
        #[arg(long)]
        orthonormal: Option<usize>,
        #[arg(long, default_value = "gaussian")]
        driver: String,
        /// Coefficient sets, separated by `;`.
        #[arg(long, default_value = "onehot;equal:4;equal:16")]
        weights: String,
        #[arg(long, default_value_t = 256)]
        eps_steps: usize,
    },
}
