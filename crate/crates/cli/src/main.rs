//! Command-line driver: basis/operator inspection, RDM and Jacobian dumps,
//! cokernel certification, variety residuals, randomized eigenstate scans,
//! and a fixed-seed selftest.
//!
//! Exit codes: 0 success, 1 usage or I/O errors, 2 when an assertion-style
//! check fails (a certification did not hold). Every report embeds the
//! command config, the seed and tolerance where applicable, the library
//! version, and the symmetry-factor convention.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rdm_moduli::fock::{Basis, Statistics, SIGMA_CONVENTION};
use rdm_moduli::io::{
    matrix_to_pairs, scan_to_csv, ComplexPair, FamilyFile, HamiltonianFile, RdmFile, StateFile,
};
use rdm_moduli::kernel::{
    hermitian_eig, numeric_rank, random_hermitian, random_state, substream, CVector,
    TolerancePolicy,
};
use rdm_moduli::moduli::{
    build_jacobian, cokernel, eigenstate_scan, eta_alignment, family_jacobian, plucker_residual,
    sample_minors, slater_embed, span_inclusion, strata_probe, symmetric_product_embed,
    veronese_residual, vec_row_major, ScanConfig,
};
use rdm_moduli::operators::{
    assemble_hamiltonian, build_projectors, hubbard_operators, Boundary, HubbardSpec,
    MParticleHamiltonian,
};
use rdm_moduli::rdm::{
    bipartite_jacobian, commutant_dimension, compute_rdm, rdm_quadratic, BipartiteState, PureState,
};

#[derive(Parser)]
#[command(name = "rdm-moduli", version, about = "Eigenstate geometry experiments on small many-body systems", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_stat(s: &str) -> Result<Statistics, String> {
    match s.to_ascii_lowercase().as_str() {
        "bose" | "boson" | "bosons" => Ok(Statistics::Bose),
        "fermi" | "fermion" | "fermions" => Ok(Statistics::Fermi),
        other => Err(format!("unknown statistics '{other}' (use bose or fermi)")),
    }
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    match s.to_ascii_lowercase().as_str() {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        other => Err(format!("unknown boundary '{other}' (use open or periodic)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate a symmetrized occupation basis.
    Basis(BasisArgs),
    /// Dump the sparse m-particle projectors.
    Projectors(ProjectorArgs),
    /// Compute the m-RDM of a state file.
    Rdm(RdmArgs),
    /// Assemble and diagonalize an m-particle Hamiltonian.
    Diag(DiagArgs),
    /// Dump the Jacobian of the RDM map at a state.
    Jacobian(JacobianArgs),
    /// Cokernel report of the Jacobian at a state.
    Cokernel(CokernelArgs),
    /// Sample Hadamard-normalized minors of the Jacobian at a state.
    Minors(MinorArgs),
    /// Plucker residual of a fermionic state (or a random Slater state).
    Plucker(PluckerArgs),
    /// Veronese residual of a bosonic state (or a random condensate).
    Veronese(VeroneseArgs),
    /// Randomized eigenstate certification scan.
    Scan(ScanArgs),
    /// Cokernel dimensions of rank-r bosonic product states.
    Strata(StrataArgs),
    /// Hubbard-family rank and minor certification.
    Hubbard(HubbardArgs),
    /// Bipartite warm-up: planted-rank cokernels and the commutant dimension.
    Bipartite(BipartiteArgs),
    /// Fixed-seed invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    command: String,
    version: String,
    sigma_convention: String,
    config: C,
    result: R,
}

fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
    output: Option<&Path>,
) -> Result<()> {
    let envelope = Envelope {
        command: command.to_string(),
        version: rdm_moduli::VERSION.to_string(),
        sigma_convention: SIGMA_CONVENTION.to_string(),
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    write_text(&text, output)
}

fn write_text(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_state(path: &Path) -> Result<PureState> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: StateFile = serde_json::from_str(&text)
        .with_context(|| format!("malformed state JSON in {}", path.display()))?;
    file.into_state()
        .with_context(|| format!("invalid state in {}", path.display()))
}

fn vectors_to_pairs(vs: &[CVector]) -> Vec<Vec<ComplexPair>> {
    vs.iter()
        .map(|v| v.iter().map(|&c| [c.re, c.im]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// basis / projectors / rdm / diag

#[derive(Args, Serialize)]
struct BasisArgs {
    #[arg(long)]
    q: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, value_parser = parse_stat)]
    stat: Statistics,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_basis(args: &BasisArgs) -> Result<u8> {
    let basis = Basis::new(args.q, args.k, args.stat)?;
    emit("basis", args, &basis, args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct ProjectorArgs {
    #[arg(long)]
    q: u32,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    #[arg(long, value_parser = parse_stat)]
    stat: Statistics,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ProjectorDump {
    q: u32,
    n: u32,
    m: u32,
    statistics: Statistics,
    normalization: f64,
    dim_n: usize,
    dim_m: usize,
    pairs: Vec<ProjectorPair>,
}

#[derive(Serialize)]
struct ProjectorPair {
    i: usize,
    j: usize,
    triplets: Vec<(u32, u32, f64)>,
}

fn cmd_projectors(args: &ProjectorArgs) -> Result<u8> {
    let p = build_projectors(args.q, args.n, args.m, args.stat)?;
    let mut pairs = Vec::new();
    for i in 0..p.dim_m() {
        for j in 0..p.dim_m() {
            pairs.push(ProjectorPair {
                i,
                j,
                triplets: p.triplets(i, j).to_vec(),
            });
        }
    }
    let dump = ProjectorDump {
        q: args.q,
        n: args.n,
        m: args.m,
        statistics: args.stat,
        normalization: p.normalization(),
        dim_n: p.dim_n(),
        dim_m: p.dim_m(),
        pairs,
    };
    emit("projectors", args, &dump, args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct RdmArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_rdm(args: &RdmArgs) -> Result<u8> {
    let psi = load_state(&args.state)?;
    let basis = psi.basis();
    let p = build_projectors(basis.q(), basis.k(), args.m, basis.statistics())?;
    let rho = compute_rdm(&psi, &p)?;
    rho.validate()?;
    emit("rdm", args, &RdmFile::from_rdm(&rho), args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct DiagArgs {
    /// m-particle Hamiltonian JSON; omit to draw a GUE sample with --seed.
    #[arg(long, conflicts_with_all = ["q", "n", "m", "stat", "seed"])]
    hamiltonian: Option<PathBuf>,
    #[arg(long, required_unless_present = "hamiltonian")]
    q: Option<u32>,
    #[arg(long, required_unless_present = "hamiltonian")]
    n: Option<u32>,
    #[arg(long, required_unless_present = "hamiltonian")]
    m: Option<u32>,
    #[arg(long, value_parser = parse_stat, required_unless_present = "hamiltonian")]
    stat: Option<Statistics>,
    #[arg(long, required_unless_present = "hamiltonian")]
    seed: Option<u64>,
    /// Also emit the eigenvectors.
    #[arg(long)]
    states: bool,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiagResult {
    q: u32,
    n: u32,
    m: u32,
    statistics: Statistics,
    dim: usize,
    eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvectors: Option<Vec<Vec<ComplexPair>>>,
}

fn cmd_diag(args: &DiagArgs) -> Result<u8> {
    let (q, n, m, stat, hm) = match &args.hamiltonian {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file: HamiltonianFile = serde_json::from_str(&text)
                .with_context(|| format!("malformed Hamiltonian JSON in {}", path.display()))?;
            let (q, n, stat) = (file.q, file.n, file.statistics);
            (q, n, file.m, stat, file.into_hamiltonian()?)
        }
        None => {
            let (q, n, m) = (args.q.unwrap(), args.n.unwrap(), args.m.unwrap());
            let stat = args.stat.unwrap();
            let n_a = Basis::new(q, m, stat)?.dim();
            let hm = MParticleHamiltonian::new(m, random_hermitian(n_a, args.seed.unwrap()))?;
            (q, n, m, stat, hm)
        }
    };
    let p = build_projectors(q, n, m, stat)?;
    let h = assemble_hamiltonian(&hm, &p)?;
    let eig = hermitian_eig(&h)?;
    let eigenvectors = args.states.then(|| {
        (0..p.dim_n())
            .map(|k| {
                eig.eigenvectors
                    .column(k)
                    .iter()
                    .map(|&c| [c.re, c.im])
                    .collect()
            })
            .collect()
    });
    let result = DiagResult {
        q,
        n,
        m,
        statistics: stat,
        dim: p.dim_n(),
        eigenvalues: eig.eigenvalues,
        eigenvectors,
    };
    emit("diag", args, &result, args.output.as_deref())?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// jacobian / cokernel / minors

#[derive(Args, Serialize)]
struct JacobianArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct JacobianDump {
    rows: usize,
    cols: usize,
    matrix: Vec<Vec<ComplexPair>>,
}

fn cmd_jacobian(args: &JacobianArgs) -> Result<u8> {
    let psi = load_state(&args.state)?;
    let basis = psi.basis();
    let p = build_projectors(basis.q(), basis.k(), args.m, basis.statistics())?;
    let jac = build_jacobian(&psi, &p)?;
    let dump = JacobianDump {
        rows: jac.rows(),
        cols: jac.cols(),
        matrix: matrix_to_pairs(&jac.matrix),
    };
    emit("jacobian", args, &dump, args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct CokernelArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    m: u32,
    /// Relative rank threshold tau.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CokernelResult {
    dim: usize,
    excess: usize,
    coker_floor: usize,
    singular_values: Vec<f64>,
    tolerance: TolerancePolicy,
    basis: Vec<Vec<ComplexPair>>,
}

fn cmd_cokernel(args: &CokernelArgs) -> Result<u8> {
    let psi = load_state(&args.state)?;
    let basis = psi.basis();
    let p = build_projectors(basis.q(), basis.k(), args.m, basis.statistics())?;
    let policy = TolerancePolicy::new(args.tol, 1e-14)?;
    let jac = build_jacobian(&psi, &p)?;
    let report = cokernel(&jac, &policy)?;
    let result = CokernelResult {
        dim: report.dim,
        excess: report.excess,
        coker_floor: jac.coker_floor(),
        singular_values: report.singular_values.clone(),
        tolerance: report.tolerance,
        basis: vectors_to_pairs(&report.basis),
    };
    emit("cokernel", args, &result, args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct MinorArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_minors(args: &MinorArgs) -> Result<u8> {
    let psi = load_state(&args.state)?;
    let basis = psi.basis();
    let p = build_projectors(basis.q(), basis.k(), args.m, basis.statistics())?;
    let jac = build_jacobian(&psi, &p)?;
    let report = sample_minors(&jac, args.count, args.seed)?;
    emit("minors", args, &report, args.output.as_deref())?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// plucker / veronese

#[derive(Args, Serialize)]
struct PluckerArgs {
    /// Fermionic state file; omit to embed a random Slater state.
    #[arg(long, conflicts_with_all = ["q", "n", "seed"])]
    state: Option<PathBuf>,
    #[arg(long, required_unless_present = "state")]
    q: Option<u32>,
    #[arg(long, required_unless_present = "state")]
    n: Option<u32>,
    #[arg(long, required_unless_present = "state")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResidualResult {
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbital_orthogonality: Option<f64>,
    state: StateFile,
}

fn random_orthonormal_orbitals(q: usize, n: usize, seed: u64) -> Vec<CVector> {
    let h = random_hermitian(q, seed);
    let eig = hermitian_eig(&h).expect("random Hermitian is exactly Hermitian");
    (0..n).map(|k| eig.eigenvectors.column(k).into_owned()).collect()
}

fn cmd_plucker(args: &PluckerArgs) -> Result<u8> {
    let (psi, orth) = match &args.state {
        Some(path) => (load_state(path)?, None),
        None => {
            let (q, n) = (args.q.unwrap() as usize, args.n.unwrap() as usize);
            let orbitals = random_orthonormal_orbitals(q, n, args.seed.unwrap());
            let orth = rdm_moduli::moduli::orbital_orthogonality_residual(&orbitals)?;
            (slater_embed(&orbitals)?, Some(orth))
        }
    };
    let result = ResidualResult {
        residual: plucker_residual(&psi)?,
        orbital_orthogonality: orth,
        state: StateFile::from_state(&psi),
    };
    emit("plucker", args, &result, args.output.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize)]
struct VeroneseArgs {
    /// Bosonic state file; omit to embed a random condensate.
    #[arg(long, conflicts_with_all = ["q", "n", "seed"])]
    state: Option<PathBuf>,
    #[arg(long, required_unless_present = "state")]
    q: Option<u32>,
    #[arg(long, required_unless_present = "state")]
    n: Option<u32>,
    #[arg(long, required_unless_present = "state")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_veronese(args: &VeroneseArgs) -> Result<u8> {
    let psi = match &args.state {
        Some(path) => load_state(path)?,
        None => {
            let q = args.q.unwrap() as usize;
            let orb = random_state(q, args.seed.unwrap());
            symmetric_product_embed(&orb, args.n.unwrap())?
        }
    };
    let result = ResidualResult {
        residual: veronese_residual(&psi)?,
        orbital_orthogonality: None,
        state: StateFile::from_state(&psi),
    };
    emit("veronese", args, &result, args.output.as_deref())?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// scan / strata

#[derive(Args, Serialize)]
struct ScanArgs {
    #[arg(long)]
    q: u32,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    #[arg(long, value_parser = parse_stat)]
    stat: Statistics,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// json (envelope) or csv (flat eigenstate records).
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_scan(args: &ScanArgs) -> Result<u8> {
    let config = ScanConfig {
        q: args.q,
        n: args.n,
        m: args.m,
        statistics: args.stat,
        trials: args.trials,
        seed: args.seed,
        tolerance: TolerancePolicy::new(args.tol, 1e-14)?,
    };
    let report = eigenstate_scan(&config)?;
    match args.format.as_str() {
        "json" => emit("scan", args, &report, args.output.as_deref())?,
        "csv" => write_text(&scan_to_csv(&report), args.output.as_deref())?,
        other => anyhow::bail!("unknown format '{other}' (use json or csv)"),
    }
    Ok(if report.assertions_hold() { 0 } else { 2 })
}

#[derive(Args, Serialize)]
struct StrataArgs {
    #[arg(long)]
    q: u32,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    r: u32,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn cmd_strata(args: &StrataArgs) -> Result<u8> {
    match strata_probe(args.q, args.n, args.r, args.samples, args.seed) {
        Ok(report) => {
            emit("strata", args, &report, args.output.as_deref())?;
            Ok(0)
        }
        Err(e @ rdm_moduli::Error::StrataMismatch { .. }) => {
            eprintln!("strata check failed: {e}");
            Ok(2)
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// hubbard / bipartite

#[derive(Args, Serialize)]
struct HubbardArgs {
    #[arg(long)]
    sites: usize,
    #[arg(long)]
    electrons: usize,
    #[arg(long, value_parser = parse_boundary, default_value = "periodic")]
    boundary: Boundary,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    /// 3x3 minors sampled per eigenstate.
    #[arg(long, default_value_t = 100)]
    minor_samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct HubbardRecord {
    index: usize,
    energy: f64,
    rank: usize,
    minor_max: f64,
    duality_residual: f64,
}

#[derive(Serialize)]
struct HubbardResult {
    dim: usize,
    family: FamilyFile,
    records: Vec<HubbardRecord>,
    all_rank_at_most_two: bool,
}

fn cmd_hubbard(args: &HubbardArgs) -> Result<u8> {
    let spec = HubbardSpec {
        sites: args.sites,
        electrons: args.electrons,
        boundary: args.boundary,
        t: args.t,
        u: args.u,
    };
    let sys = hubbard_operators(spec)?;
    let h = sys.hamiltonian();
    let eig = hermitian_eig(&h)?;
    let policy = TolerancePolicy::default();
    let mut records = Vec::with_capacity(sys.basis.dim());
    let mut all_ok = true;
    for k in 0..sys.basis.dim() {
        let psi = eig.eigenvectors.column(k).into_owned();
        let jac = family_jacobian(&psi, &sys.family)?;
        let rank = numeric_rank(&jac.matrix, &policy)?;
        let minors = sample_minors(&jac, args.minor_samples, args.seed + k as u64)?;
        // eta = (-E, t, U) annihilates the rows of an eigenstate Jacobian.
        let eta = CVector::from_vec(vec![
            nalgebra::Complex::new(-eig.eigenvalues[k], 0.0),
            nalgebra::Complex::new(args.t, 0.0),
            nalgebra::Complex::new(args.u, 0.0),
        ]);
        let duality = (jac.matrix.transpose() * eta).norm();
        if rank > 2 {
            all_ok = false;
        }
        records.push(HubbardRecord {
            index: k,
            energy: eig.eigenvalues[k],
            rank,
            minor_max: minors.max,
            duality_residual: duality,
        });
    }
    let result = HubbardResult {
        dim: sys.basis.dim(),
        family: FamilyFile::from_family(&sys.family),
        records,
        all_rank_at_most_two: all_ok,
    };
    emit("hubbard", args, &result, args.output.as_deref())?;
    Ok(if all_ok { 0 } else { 2 })
}

#[derive(Args, Serialize)]
struct BipartiteArgs {
    #[arg(long)]
    na: usize,
    #[arg(long)]
    nb: usize,
    /// Planted rank of the sampled state.
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct BipartiteResult {
    coker_dim: usize,
    expected_coker_dim: usize,
    commutant_dim: usize,
    expected_commutant_dim: usize,
}

fn cmd_bipartite(args: &BipartiteArgs) -> Result<u8> {
    use rand::Rng;
    if args.rank < 1 || args.rank > args.na.min(args.nb) {
        anyhow::bail!("rank must lie in 1..=min(na, nb)");
    }
    let mut rng = substream(args.seed, 0);
    let mut g = || nalgebra::Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    let a = rdm_moduli::kernel::CMatrix::from_fn(args.na, args.rank, |_, _| g());
    let b = rdm_moduli::kernel::CMatrix::from_fn(args.rank, args.nb, |_, _| g());
    let mut m = a * b;
    let norm = m.norm();
    m /= nalgebra::Complex::new(norm, 0.0);
    let state = BipartiteState::new(m)?;
    let jac = bipartite_jacobian(&state)?;
    let report = cokernel(&jac, &TolerancePolicy::default())?;
    let expected = (args.na - args.rank) * (args.na - args.rank);
    let commutant = commutant_dimension(args.na, args.nb)?;
    let result = BipartiteResult {
        coker_dim: report.dim,
        expected_coker_dim: expected,
        commutant_dim: commutant,
        expected_commutant_dim: args.nb * args.nb,
    };
    emit("bipartite", args, &result, args.output.as_deref())?;
    Ok(
        if report.dim == expected && commutant == args.nb * args.nb {
            0
        } else {
            2
        },
    )
}

// ---------------------------------------------------------------------------
// selftest

#[derive(Args, Serialize)]
struct SelftestArgs {
    /// Flip the bosonic symmetry-factor convention to demonstrate that the
    /// trace identity pins it down (negative control; must fail).
    #[arg(long)]
    corrupt_sigma: bool,
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn selftest_checks(corrupt_sigma: bool) -> Result<Vec<Check>> {
    use rdm_moduli::fock::{concat_index, sigma_with_convention, SigmaConvention};
    use rand::Rng;

    let mut checks = Vec::new();
    let convention = if corrupt_sigma {
        SigmaConvention::PrintedAlternate
    } else {
        SigmaConvention::TraceConsistent
    };

    // Trace identity, recomputed from the chosen sigma convention.
    {
        let (q, n, m, stat) = (2, 4, 2, Statistics::Bose);
        let basis_n = Basis::new(q, n, stat)?;
        let basis_m = Basis::new(q, m, stat)?;
        let basis_env = Basis::new(q, n - m, stat)?;
        let c = rdm_moduli::fock::binomial(n as u64, m as u64) as f64;
        let mut diag = vec![0.0f64; basis_n.dim()];
        for set_i in basis_m.sets() {
            for set_k in basis_env.sets() {
                let s = sigma_with_convention(set_i, set_k, stat, convention)?;
                if s == 0.0 {
                    continue;
                }
                let cat = concat_index(set_i, set_k, stat)?;
                let pos = basis_n.position(&cat.sorted).unwrap();
                diag[pos] += s * s / c;
            }
        }
        let err = diag
            .iter()
            .map(|d| (d - 1.0).abs())
            .fold(0.0f64, f64::max);
        checks.push(Check {
            name: "trace-identity",
            pass: err <= 1e-12,
            detail: format!("max deviation {err:.3e}"),
        });
    }

    // Finite-difference consistency of the Jacobian.
    {
        let p = build_projectors(2, 4, 2, Statistics::Bose)?;
        let psi = PureState::new(p.basis_n().clone(), random_state(p.dim_n(), 101))?;
        let jac = build_jacobian(&psi, &p)?;
        let dim = p.dim_n();
        let mut rng = substream(102, 0);
        let mut delta = CVector::from_fn(dim, |_, _| {
            nalgebra::Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let dn = delta.norm();
        delta *= nalgebra::Complex::new(1e-6 / dn, 0.0);
        let rho0 = rdm_quadratic(psi.basis(), psi.amplitudes(), 2)?;
        let moved = psi.amplitudes() + &delta;
        let rho1 = rdm_quadratic(psi.basis(), &moved, 2)?;
        let mut dvec = CVector::zeros(2 * dim);
        for k in 0..dim {
            dvec[k] = delta[k];
            dvec[dim + k] = delta[k].conj();
        }
        let err = (vec_row_major(&(&rho1 - &rho0)) - &jac.matrix * dvec).norm();
        checks.push(Check {
            name: "finite-difference-jacobian",
            pass: err <= 1e-9,
            detail: format!("residual {err:.3e}"),
        });
    }

    // Plucker: embedded Slater states satisfy the relations, controls do not.
    {
        let orbitals = random_orthonormal_orbitals(5, 2, 103);
        let embedded = plucker_residual(&slater_embed(&orbitals)?)?;
        let basis = Basis::new(4, 2, Statistics::Fermi)?;
        let control =
            plucker_residual(&PureState::new(basis.clone(), random_state(basis.dim(), 104))?)?;
        checks.push(Check {
            name: "plucker-relations",
            pass: embedded <= 1e-12 && control > 1e-3,
            detail: format!("embedded {embedded:.3e}, control {control:.3e}"),
        });
    }

    // Veronese: condensates satisfy the relations, controls do not.
    {
        let orb = random_state(3, 105);
        let embedded = veronese_residual(&symmetric_product_embed(&orb, 4)?)?;
        let basis = Basis::new(3, 4, Statistics::Bose)?;
        let control =
            veronese_residual(&PureState::new(basis.clone(), random_state(basis.dim(), 106))?)?;
        checks.push(Check {
            name: "veronese-relations",
            pass: embedded <= 1e-12 && control > 1e-3,
            detail: format!("embedded {embedded:.3e}, control {control:.3e}"),
        });
    }

    // Bipartite: planted corank squared.
    {
        use rand::Rng;
        let mut rng = substream(107, 0);
        let mut g = || nalgebra::Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let a = rdm_moduli::kernel::CMatrix::from_fn(3, 2, |_, _| g());
        let b = rdm_moduli::kernel::CMatrix::from_fn(2, 4, |_, _| g());
        let mut m = a * b;
        let norm = m.norm();
        m /= nalgebra::Complex::new(norm, 0.0);
        let jac = bipartite_jacobian(&BipartiteState::new(m)?)?;
        let dim = cokernel(&jac, &TolerancePolicy::default())?.dim;
        checks.push(Check {
            name: "bipartite-corank-squared",
            pass: dim == 1,
            detail: format!("planted rank 2 in (3,4): dim {dim}"),
        });
    }

    // Commutant dimensions.
    {
        let d22 = commutant_dimension(2, 2)?;
        let d32 = commutant_dimension(3, 2)?;
        checks.push(Check {
            name: "commutant-dimension",
            pass: d22 == 4 && d32 == 4,
            detail: format!("(2,2) -> {d22}, (3,2) -> {d32}"),
        });
    }

    // Span inclusion of the one-body Jacobian in the two-body one.
    {
        let p1 = build_projectors(2, 6, 1, Statistics::Bose)?;
        let p2 = build_projectors(2, 6, 2, Statistics::Bose)?;
        let psi = PureState::new(p1.basis_n().clone(), random_state(p1.dim_n(), 108))?;
        let j1 = build_jacobian(&psi, &p1)?;
        let j2 = build_jacobian(&psi, &p2)?;
        let resid = span_inclusion(&j1, &j2)?;
        checks.push(Check {
            name: "span-inclusion",
            pass: resid <= 1e-10,
            detail: format!("residual {resid:.3e}"),
        });
    }

    // Eigenstate certification on a small scan.
    {
        let report = eigenstate_scan(&ScanConfig {
            q: 2,
            n: 4,
            m: 2,
            statistics: Statistics::Bose,
            trials: 3,
            seed: 109,
            tolerance: TolerancePolicy::default(),
        })?;
        let all_aligned = report
            .records
            .iter()
            .filter(|r| !r.degenerate)
            .all(|r| r.eta_alignment >= 1.0 - 1e-8);
        checks.push(Check {
            name: "eigenstate-certification",
            pass: report.assertions_hold() && all_aligned,
            detail: format!(
                "{} eigenstates, {} controls",
                report.records.len(),
                report.controls.len()
            ),
        });
    }

    // Eta recovery against the shifted Hamiltonian.
    {
        let p = build_projectors(2, 6, 2, Statistics::Bose)?;
        let hm = MParticleHamiltonian::new(2, random_hermitian(p.dim_m(), 110))?;
        let h = assemble_hamiltonian(&hm, &p)?;
        let eig = hermitian_eig(&h)?;
        let psi = PureState::new(p.basis_n().clone(), eig.eigenvectors.column(2).into_owned())?;
        let jac = build_jacobian(&psi, &p)?;
        let report = cokernel(&jac, &TolerancePolicy::default())?;
        let target = hm.matrix()
            - rdm_moduli::kernel::CMatrix::identity(p.dim_m(), p.dim_m())
                * nalgebra::Complex::new(eig.eigenvalues[2], 0.0);
        let alignment = eta_alignment(&report.basis, &target);
        checks.push(Check {
            name: "eta-recovery",
            pass: report.dim == 1 && alignment >= 1.0 - 1e-8,
            detail: format!("dim {}, alignment 1 - {:.3e}", report.dim, 1.0 - alignment),
        });
    }

    Ok(checks)
}

fn cmd_selftest(args: &SelftestArgs) -> Result<u8> {
    let checks = selftest_checks(args.corrupt_sigma)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for check in &checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("{:width$}  {}  {}", check.name, status, check.detail);
        if !check.pass {
            failed += 1;
        }
    }
    println!(
        "selftest: {}/{} checks passed (sigma convention: {})",
        checks.len() - failed,
        checks.len(),
        if args.corrupt_sigma {
            "corrupted (negative control)"
        } else {
            "trace-consistent"
        }
    );
    Ok(if failed == 0 { 0 } else { 2 })
}

// ---------------------------------------------------------------------------

fn run() -> Result<u8> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(0);
            }
            eprint!("{e}");
            return Ok(1);
        }
    };
    match &cli.command {
        Command::Basis(args) => cmd_basis(args),
        Command::Projectors(args) => cmd_projectors(args),
        Command::Rdm(args) => cmd_rdm(args),
        Command::Diag(args) => cmd_diag(args),
        Command::Jacobian(args) => cmd_jacobian(args),
        Command::Cokernel(args) => cmd_cokernel(args),
        Command::Minors(args) => cmd_minors(args),
        Command::Plucker(args) => cmd_plucker(args),
        Command::Veronese(args) => cmd_veronese(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Strata(args) => cmd_strata(args),
        Command::Hubbard(args) => cmd_hubbard(args),
        Command::Bipartite(args) => cmd_bipartite(args),
        Command::Selftest(args) => cmd_selftest(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
