use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use pf_core::dsl::{load_workspace, parse_agent_in, ParseDiagnostic, ToDsl, WorkspaceError};
use pf_core::generate::{
    generate_bundle, write_atomic, write_bundle, BundleError, BUNDLE_EXTENSION,
};
use pf_core::model::{AgentModel, ModelWorkspace, PersonalizationMapping};
use pf_core::personalize::{
    personalize as run_m2m, LlmRewriter, MockRewriter, PersonalizationRun, PersonalizeError,
    RewriteAdapter,
};
use pf_core::runtime::{GenerationAdapter, LlmGenerator, MockGenerator};
use pf_core::validate::{diff_models, validate_agent, validate_workspace, DiffOptions};
use pf_service::{load_registry, ServiceConfig, ServiceError};

use crate::{Failure, Format};

type Outcome = Result<(), Failure>;

fn print_diagnostics(diagnostics: &[ParseDiagnostic]) {
    for d in diagnostics {
        eprintln!("{d}");
    }
}

fn load(workspace: &Path) -> Result<ModelWorkspace, Failure> {
    load_workspace(workspace).map_err(|err| match err {
        WorkspaceError::Parse(diagnostics) => {
            print_diagnostics(&diagnostics);
            Failure::invalid(anyhow!("{} parse error(s)", diagnostics.len()))
        }
        io @ WorkspaceError::Io { .. } => Failure::usage(io),
    })
}

/// Refuses to continue when the workspace has validation errors.
fn gate(ws: &ModelWorkspace) -> Outcome {
    let report = validate_workspace(ws);
    if report.passed {
        return Ok(());
    }
    eprintln!("{report}");
    Err(Failure::invalid(anyhow!("workspace fails validation")))
}

fn mapping<'a>(ws: &'a ModelWorkspace, id: &str) -> Result<&'a PersonalizationMapping, Failure> {
    ws.mapping(id).ok_or_else(|| {
        let known: Vec<&str> = ws.mappings.iter().map(|m| m.id.as_str()).collect();
        Failure::usage(anyhow!(
            "no mapping '{id}' (available: {})",
            if known.is_empty() {
                "none".to_string()
            } else {
                known.join(", ")
            }
        ))
    })
}

fn rewriter(mock: bool) -> Result<Box<dyn RewriteAdapter>, Failure> {
    if mock {
        Ok(Box::new(MockRewriter::new()))
    } else {
        Ok(Box::new(LlmRewriter::from_env().map_err(Failure::adapter)?))
    }
}

fn generator(mock: bool) -> Result<Arc<dyn GenerationAdapter>, Failure> {
    if mock {
        Ok(Arc::new(MockGenerator::new()))
    } else {
        Ok(Arc::new(
            LlmGenerator::from_env().map_err(Failure::adapter)?,
        ))
    }
}

fn personalize_failure(err: PersonalizeError) -> Failure {
    match err {
        e @ PersonalizeError::Unbatchable { .. } => Failure::invalid(e),
        e => Failure::adapter(e),
    }
}

fn output_stem(agent: &AgentModel, mapping: &PersonalizationMapping) -> String {
    format!("{}.{}", agent.id, mapping.id)
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    write_atomic(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

pub fn validate(workspace: &Path, format: Format) -> Outcome {
    let ws = load(workspace)?;
    let report = validate_workspace(&ws);
    match format {
        Format::Text => println!("{report}"),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::invalid(anyhow!("workspace fails validation")))
    }
}

pub fn personalize(workspace: &Path, map: &str, mock: bool, out: Option<&Path>) -> Outcome {
    let ws = load(workspace)?;
    gate(&ws)?;
    let mapping = mapping(&ws, map)?;
    let resolved = ws.resolve_mapping(mapping).map_err(Failure::invalid)?;
    let adapter = rewriter(mock)?;
    let run = run_m2m(resolved, adapter.as_ref()).map_err(personalize_failure)?;

    let report = validate_agent(&run.result);
    if !report.passed {
        eprintln!("{report}");
        return Err(Failure::invalid(anyhow!(
            "personalized agent fails validation"
        )));
    }

    let dir = out.unwrap_or(workspace);
    let stem = output_stem(resolved.agent, mapping);
    let agent_path = dir.join(format!("{stem}.agent"));
    let log_path = dir.join(format!("{stem}.run.json"));
    write_file(&agent_path, run.result.to_dsl().as_bytes())?;
    write_file(&log_path, run.to_json().as_bytes())?;

    let changed = diff_models(resolved.agent, &run.result, DiffOptions::default())
        .map(|d| d.text_changes.len())
        .unwrap_or_default();
    println!(
        "applied {} aspect(s): {}",
        run.aspect_log.len(),
        run.applied_aspects()
            .map(|a| a.label())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("{changed} predefined response(s) changed");
    println!("wrote {}", agent_path.display());
    println!("wrote {}", log_path.display());
    Ok(())
}

fn read_agent(path: &Path) -> Result<AgentModel, Failure> {
    let source = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)?;
    parse_agent_in(&source, &path.display().to_string()).map_err(|diagnostics| {
        print_diagnostics(&diagnostics);
        Failure::invalid(anyhow!("{} does not parse", path.display()))
    })
}

pub fn diff(base: &Path, adapted: &Path, format: Format) -> Outcome {
    let base = read_agent(base)?;
    let adapted = read_agent(adapted)?;
    let diff =
        diff_models(&base, &adapted, DiffOptions { structural: true }).map_err(Failure::invalid)?;
    match format {
        Format::Text => println!("{diff}"),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&diff).expect("diff serializes")
        ),
    }
    Ok(())
}

pub fn generate(
    workspace: &Path,
    map: &str,
    mock: bool,
    fresh: bool,
    out: Option<&Path>,
) -> Outcome {
    let ws = load(workspace)?;
    gate(&ws)?;
    let mapping = mapping(&ws, map)?;
    let resolved = ws.resolve_mapping(mapping).map_err(Failure::invalid)?;
    let dir = out.unwrap_or(workspace);
    let stem = output_stem(resolved.agent, mapping);
    let adapted_path = dir.join(format!("{stem}.agent"));

    let run = if adapted_path.is_file() && !fresh {
        let result = read_agent(&adapted_path)?;
        if result.id != resolved.agent.id {
            return Err(Failure::invalid(anyhow!(
                "{} defines agent '{}', expected '{}'",
                adapted_path.display(),
                result.id,
                resolved.agent.id
            )));
        }
        println!("using reviewed agent {}", adapted_path.display());
        PersonalizationRun {
            base_agent: resolved.agent.id.clone(),
            configuration: Some(resolved.configuration.id.clone()),
            user_profile: Some(resolved.profile.id.clone()),
            aspect_log: Vec::new(),
            result,
        }
    } else {
        let adapter = rewriter(mock)?;
        run_m2m(resolved, adapter.as_ref()).map_err(personalize_failure)?
    };

    let bundle = generate_bundle(&run, resolved.configuration, resolved.profile).map_err(
        |err| match err {
            BundleError::ValidationFailed(findings) => {
                for f in &findings {
                    eprintln!("error[{}] {}: {}", f.code, f.subject, f.message);
                }
                Failure::invalid(anyhow!("personalized agent fails validation"))
            }
            other => Failure::usage(other),
        },
    )?;
    let path = dir.join(format!("{stem}.{BUNDLE_EXTENSION}"));
    write_bundle(&bundle, &path).map_err(Failure::usage)?;
    println!("wrote {} (sha256 {})", path.display(), bundle.digest);
    Ok(())
}

pub fn run(
    bundles: &[PathBuf],
    mock: bool,
    bind: Option<SocketAddr>,
    no_typing_delay: bool,
) -> Outcome {
    let mut config = ServiceConfig::from_env().map_err(Failure::usage)?;
    if let Some(addr) = bind {
        config.bind_addr = addr;
    }
    if no_typing_delay {
        config.typing_delays = false;
    }
    let registry = load_registry(&config, bundles).map_err(|err| match err {
        ServiceError::Bundle(BundleError::Io { .. }) => Failure::usage(err),
        other => Failure::invalid(other),
    })?;
    if registry.is_empty() {
        eprintln!("warning: no bundles loaded; pass bundle files or set PF_BUNDLE_DIR");
    }
    for card in registry.cards() {
        println!("loaded {} ({})", card.bundle_id, card.profile_label);
    }
    let adapter = generator(mock)?;
    let runtime = tokio::runtime::Runtime::new()
        .context("cannot start async runtime")
        .map_err(Failure::usage)?;
    println!("serving on http://{}", config.bind_addr);
    runtime
        .block_on(pf_service::serve(config, registry, adapter))
        .map_err(Failure::usage)
}
