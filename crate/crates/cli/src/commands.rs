use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use capnet::deltas::{compensate, CompensationTrace, DeltaError, FuzzyParams, Outcome};
use capnet::network::{
    build_pipeline, ConjugationGraph, GraphInputs, GraphParams, InterrelationTable, NetworkError, Orientation,
    StageOrder, StrongCandidateTable,
};
use capnet::profiles::{
    filter_profiles, generate_synthetic_profiles, propagate_main_level, GeneratorConfig, Phase, ProfileDataset,
    ProfileError, RequirementSet,
};
use capnet::stats::{classify_correlation, correlation_matrix, p_value_matrix, CorrelationMatrix, CorrelationStrength, StatsError};
use capnet::synthesis::{
    render_shaded, synthesize, write_sequence_table, BranchAndBound, LintWarning, MovementSequence, SynthesisError,
    SynthesisParams,
};
use capnet::taxonomy::{sitting_over_table_set, CapabilityCatalog, CapabilityId};
use serde::Serialize;

use crate::{
    open, read_text, write_artifact, AllocateArgs, AnalyzeArgs, BuildGraphArgs, Cli, CliError, Command, GenDataArgs,
    GraphSource, OrientationArg, PhaseArg, SynthesizeArgs,
};

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Io(_) => CliError::Internal(e.to_string()),
            NetworkError::InvalidThreshold(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            SynthesisError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            SynthesisError::Solver(_) | SynthesisError::Consistency(_) | SynthesisError::Io(_) => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::NoResamples => CliError::Usage(e.to_string()),
            StatsError::Io(_) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Config(_) => CliError::Usage(e.to_string()),
            ProfileError::Io(_) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DeltaError> for CliError {
    fn from(e: DeltaError) -> Self {
        match e {
            DeltaError::InvalidFuzz(_) => CliError::Usage(e.to_string()),
            DeltaError::Json(_) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Prefixes a parse failure with the file it came from.
fn in_file<E: Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn emit(out: &mut dyn Write, text: impl Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Internal(format!("writing report: {e}")))
}

/// Runs one parsed invocation, writing the human-readable report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::BuildGraph(args) => build_graph(args, out),
        Command::Synthesize(args) => synthesize_cmd(args, out),
        Command::Analyze(args) => analyze(args, out),
        Command::Allocate(args) => allocate(args, out),
        Command::GenData(args) => gen_data(args, out),
    }
}

fn load_catalog(path: Option<&Path>) -> Result<CapabilityCatalog, CliError> {
    match path {
        Some(p) => CapabilityCatalog::from_csv(open(p)?).map_err(in_file(p)),
        None => Ok(CapabilityCatalog::reference()),
    }
}

fn load_graph(source: &GraphSource, catalog: &CapabilityCatalog) -> Result<ConjugationGraph, CliError> {
    match &source.graph {
        Some(p) => Ok(ConjugationGraph::from_json(&read_text(p)?).map_err(in_file(p))?),
        None => Ok(build_pipeline(&GraphInputs::reference(), &GraphParams::default())?.graph.with_names(catalog)),
    }
}

fn build_graph(args: BuildGraphArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.threshold >= 0.0 && args.threshold <= 1.0) {
        return Err(CliError::Usage(format!("--threshold must lie in [0, 1], got {}", args.threshold)));
    }
    if args.n_min == 0 {
        return Err(CliError::Usage("--n-min must be at least 1".into()));
    }
    let catalog = load_catalog(args.catalog.as_deref())?;
    let interrelations = if args.interrelations.is_empty() {
        InterrelationTable::reference_with_supplement()
    } else {
        let mut entries = Vec::new();
        for p in &args.interrelations {
            entries.extend(InterrelationTable::from_csv(open(p)?).map_err(in_file(p))?.entries().iter().cloned());
        }
        InterrelationTable::new(entries)?
    };
    interrelations.validate(&catalog)?;
    let correlations = match &args.correlations {
        Some(p) => CorrelationMatrix::read_csv(open(p)?, args.samples).map_err(in_file(p))?,
        None => CorrelationMatrix::reference(),
    };
    let candidates = match &args.candidates {
        Some(p) => StrongCandidateTable::from_csv(open(p)?).map_err(in_file(p))?,
        None => StrongCandidateTable::reference(),
    };
    let orientation = match args.orientation {
        OrientationArg::Relational => Orientation::Relational,
        OrientationArg::Stages => Orientation::MovementStages(match &args.stages {
            Some(p) => StageOrder::from_csv(open(p)?).map_err(in_file(p))?,
            None => StageOrder::reference(),
        }),
    };
    let inputs = GraphInputs { catalog, interrelations, correlations, candidates };
    let params = GraphParams { threshold: args.threshold, repair: !args.no_repair, n_min: args.n_min, orientation };
    let mut build = build_pipeline(&inputs, &params)?;
    build.graph = build.graph.with_names(&inputs.catalog);
    emit(out, &build)?;
    if let Some(p) = &args.out_json {
        write_artifact(p, build.graph.to_json().as_bytes())?;
    }
    if let Some(p) = &args.out_dot {
        write_artifact(p, build.graph.to_dot().as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthesisDoc<'a> {
    n_min: usize,
    min_visits: usize,
    max_visits: usize,
    candidate_paths: usize,
    objective: usize,
    lp_bound: f64,
    nodes_explored: usize,
    visits: Vec<NodeVisits>,
    sequences: &'a [MovementSequence],
    warnings: &'a [LintWarning],
}

#[derive(Serialize)]
struct NodeVisits {
    id: CapabilityId,
    visits: usize,
}

fn synthesize_cmd(args: SynthesizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let catalog = load_catalog(args.source.catalog.as_deref())?;
    let graph = load_graph(&args.source, &catalog)?;
    let params = SynthesisParams { n_min: args.n_min, min_visits: args.p_max, max_visits: args.p_hat_max };
    let run = synthesize(&graph, &catalog, &params, &BranchAndBound::default())?;
    let sol = &run.solution;
    emit(out, format_args!("{} candidate paths with at least {} capabilities", run.problem.paths.len(), args.n_min))?;
    emit(
        out,
        format_args!(
            "{} sequences selected (relaxation bound {:.3}, {} search nodes)",
            sol.objective, sol.lp_bound, sol.nodes_explored
        ),
    )?;
    emit(out, "visits per capability:")?;
    for (id, v) in &sol.visits {
        emit(out, format_args!("  {id} {v}"))?;
    }
    for w in &run.warnings {
        emit(out, format_args!("warning: {}", w.message))?;
    }
    if args.shaded {
        emit(out, render_shaded(&run.sequences).trim_end())?;
    }
    if let Some(p) = &args.out {
        let mut buf = Vec::new();
        write_sequence_table(&run.sequences, &mut buf)?;
        write_artifact(p, &buf)?;
    }
    if let Some(p) = &args.out_json {
        let doc = SynthesisDoc {
            n_min: params.n_min,
            min_visits: params.min_visits,
            max_visits: params.max_visits,
            candidate_paths: run.problem.paths.len(),
            objective: sol.objective,
            lp_bound: sol.lp_bound,
            nodes_explored: sol.nodes_explored,
            visits: sol.visits.iter().map(|(id, visits)| NodeVisits { id: *id, visits: *visits }).collect(),
            sequences: &run.sequences,
            warnings: &run.warnings,
        };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
        write_artifact(p, text.as_bytes())?;
    }
    Ok(())
}

fn parse_ids(list: &[String]) -> Result<Vec<CapabilityId>, CliError> {
    list.iter()
        .map(|s| s.trim().parse().map_err(|e| CliError::Usage(format!("--ids: {e}"))))
        .collect()
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.threshold.is_nan() || args.threshold < 0.0 {
        return Err(CliError::Usage(format!("--threshold must be non-negative, got {}", args.threshold)));
    }
    if args.resamples == 0 {
        return Err(CliError::Usage("--resamples must be at least 1".into()));
    }
    let catalog = load_catalog(args.catalog.as_deref())?;
    let ids = if args.ids.is_empty() { sitting_over_table_set(&catalog) } else { parse_ids(&args.ids)? };
    if ids.len() < 2 {
        return Err(CliError::Usage("need at least two capabilities to correlate".into()));
    }
    let data = ProfileDataset::read_csv(open(&args.data)?, Some(&catalog), args.data.display().to_string())
        .map_err(in_file(&args.data))?;
    let data = match args.phase {
        PhaseArg::Pre => data.with_phase(Phase::PreRehab),
        PhaseArg::Post => data.with_phase(Phase::PostRehab),
        PhaseArg::All => data,
    };
    let total = data.len();
    let kept = filter_profiles(&data, &ids, args.threshold);
    emit(out, format_args!("retained {} of {} profiles", kept.len(), total))?;
    if kept.len() < 2 {
        return Err(CliError::Data(format!(
            "{} profiles left after filtering at threshold {}; nothing to correlate",
            kept.len(),
            args.threshold
        )));
    }
    let kept = kept.map_profiles(|p| propagate_main_level(p, &catalog));
    let corr = correlation_matrix(&kept, &ids)?;
    let pvals = p_value_matrix(&kept, &ids, args.resamples, args.seed)?;

    let mut counts = [0usize; 3];
    let mut undefined = 0;
    let mut strong = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate().skip(i + 1) {
            match corr.table.cell(i, j) {
                None => undefined += 1,
                Some(r) => {
                    let class = classify_correlation(r);
                    counts[class as usize] += 1;
                    if class == CorrelationStrength::Strong {
                        strong.push((*a, *b, r, pvals.cell(i, j)));
                    }
                }
            }
        }
    }
    emit(
        out,
        format_args!(
            "pairs: {} strong, {} moderate, {} weak, {} undefined ({} resamples, seed {})",
            counts[2], counts[1], counts[0], undefined, args.resamples, args.seed
        ),
    )?;
    for (a, b, r, p) in strong {
        let p = p.map_or("n/a".to_string(), |p| format!("{p:.5}"));
        emit(out, format_args!("  strong {a} {b} r={r:.3} p={p}"))?;
    }
    if let Some(path) = &args.out_corr {
        write_artifact(path, corr.table.to_csv_string().as_bytes())?;
    }
    if let Some(path) = &args.out_p {
        write_artifact(path, pvals.to_csv_string().as_bytes())?;
    }
    Ok(())
}

fn parse_fuzz(xi: &[String], theta: u32) -> Result<FuzzyParams, CliError> {
    let mut fuzz = FuzzyParams { theta, ..FuzzyParams::default() };
    for item in xi {
        let (id, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--xi expects id=value, got {item:?}")))?;
        let id: CapabilityId = id.trim().parse().map_err(|e| CliError::Usage(format!("--xi: {e}")))?;
        let v: u8 = v.trim().parse().map_err(|_| CliError::Usage(format!("--xi: bad value in {item:?}")))?;
        fuzz.xi.insert(id, v);
    }
    Ok(fuzz)
}

fn allocate(args: AllocateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let catalog = load_catalog(args.source.catalog.as_deref())?;
    let fuzz = parse_fuzz(&args.xi, args.theta)?;
    let graph = load_graph(&args.source, &catalog)?;
    let profiles = ProfileDataset::read_csv(open(&args.profiles)?, Some(&catalog), args.profiles.display().to_string())
        .map_err(in_file(&args.profiles))?;
    let profile = match &args.agent {
        Some(a) => profiles.profiles().iter().find(|p| &p.agent_id == a),
        None => profiles.profiles().first(),
    }
    .ok_or_else(|| CliError::Data(format!("{}: no matching profile", args.profiles.display())))?;
    let profile = propagate_main_level(profile, &catalog);
    let mut actions = RequirementSet::read_csv(open(&args.requirements)?, Some(&catalog)).map_err(in_file(&args.requirements))?;
    if let Some(a) = &args.action {
        actions.retain(|r| &r.action_id == a);
        if actions.is_empty() {
            return Err(CliError::Data(format!("{}: no action {a}", args.requirements.display())));
        }
    }
    let traces: Vec<CompensationTrace> =
        actions.iter().map(|req| compensate(req, &profile, &graph, &fuzz)).collect::<Result<_, _>>()?;
    let mut text = String::new();
    for t in &traces {
        text.push_str(&t.to_text());
    }
    emit(out, text.trim_end())?;
    if let Some(p) = &args.out_text {
        write_artifact(p, text.as_bytes())?;
    }
    if let Some(p) = &args.out_json {
        let json = serde_json::to_string_pretty(&traces).map_err(|e| CliError::Internal(e.to_string()))?;
        write_artifact(p, json.as_bytes())?;
    }
    let failed: Vec<&str> =
        traces.iter().filter(|t| t.outcome == Outcome::Infeasible).map(|t| t.action_id.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!("{} cannot perform {}", profile.agent_id, failed.join(", "))))
    }
}

fn gen_data(args: GenDataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = GeneratorConfig { count: args.count, pre_only: args.pre_only, ..GeneratorConfig::default() };
    if let Some(f) = args.degenerate_fraction {
        config.degenerate_fraction = f;
    }
    let data = generate_synthetic_profiles(&config, args.seed)?;
    write_artifact(&args.out, data.to_csv_string().as_bytes())?;
    emit(out, format_args!("wrote {} profiles to {}", data.len(), args.out.display()))
}
