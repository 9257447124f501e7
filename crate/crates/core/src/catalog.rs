//! Built-in problem documents: every explicit equation, metric, covector,
//! Lax pair and constraint system the engine ships with. The files under
//! `catalog/` use the same format the command line reads.

use crate::analysis::{self, CheckOptions};
use crate::dsl::{self, compile, parse, Problem};
use crate::geometry;
use crate::runner::{self, Expectation};

static SOURCES: &[(&str, &str)] = &[
    ("bf-hydrodynamic", include_str!("../catalog/bf-hydrodynamic.ewd")),
    ("bogdanov", include_str!("../catalog/bogdanov.ewd")),
    ("bogdanov-reduction", include_str!("../catalog/bogdanov-reduction.ewd")),
    ("boyer-finley", include_str!("../catalog/boyer-finley.ewd")),
    ("chazy-hirota", include_str!("../catalog/chazy-hirota.ewd")),
    ("constant-dispersion", include_str!("../catalog/constant-dispersion.ewd")),
    ("dkp", include_str!("../catalog/dkp.ewd")),
    ("dkp-perturbed-lax", include_str!("../catalog/dkp-perturbed-lax.ewd")),
    ("dunajski-tod", include_str!("../catalog/dunajski-tod.ewd")),
    ("exp-hirota", include_str!("../catalog/exp-hirota.ewd")),
    ("first-heavenly", include_str!("../catalog/first-heavenly.ewd")),
    ("first-order-lagrangian", include_str!("../catalog/first-order-lagrangian.ewd")),
    ("general-heavenly", include_str!("../catalog/general-heavenly.ewd")),
    ("hamiltonian-integrability", include_str!("../catalog/hamiltonian-integrability.ewd")),
    ("hamiltonian-vw", include_str!("../catalog/hamiltonian-vw.ewd")),
    ("husain", include_str!("../catalog/husain.ewd")),
    ("lagrangian-p", include_str!("../catalog/lagrangian-p.ewd")),
    ("linear-wave", include_str!("../catalog/linear-wave.ewd")),
    ("manakov-santini", include_str!("../catalog/manakov-santini.ewd")),
    ("minimal-hypersurface", include_str!("../catalog/minimal-hypersurface.ewd")),
    ("modified-heavenly", include_str!("../catalog/modified-heavenly.ewd")),
    ("monge-ampere-affine", include_str!("../catalog/monge-ampere-affine.ewd")),
    ("monge-ampere-elliptic", include_str!("../catalog/monge-ampere-elliptic.ewd")),
    ("monge-ampere-hyperbolic", include_str!("../catalog/monge-ampere-hyperbolic.ewd")),
    ("perturbed-wave", include_str!("../catalog/perturbed-wave.ewd")),
    ("second-heavenly", include_str!("../catalog/second-heavenly.ewd")),
    ("shallow-water-cubed", include_str!("../catalog/shallow-water-cubed.ewd")),
    ("shallow-water-reduction", include_str!("../catalog/shallow-water-reduction.ewd")),
    ("type-i-exponential", include_str!("../catalog/type-i-exponential.ewd")),
    ("type-i-general", include_str!("../catalog/type-i-general.ewd")),
    ("type-i-logarithmic", include_str!("../catalog/type-i-logarithmic.ewd")),
    ("type-i-quadratic", include_str!("../catalog/type-i-quadratic.ewd")),
    ("type-iii-general", include_str!("../catalog/type-iii-general.ewd")),
];

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("no catalog entry named '{0}'")]
    Unknown(String),
    #[error("catalog entry '{name}': {diag}")]
    Document { name: String, diag: dsl::Diagnostic },
    #[error("catalog entry '{name}' is inconsistent: {problems:?}")]
    Invalid { name: String, problems: Vec<String> },
}

/// Entry names in sorted order.
pub fn list() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

/// Document text of an entry, by name or alias.
pub fn source(name: &str) -> Option<&'static str> {
    if let Some((_, s)) = SOURCES.iter().find(|(n, _)| *n == name) {
        return Some(s);
    }
    SOURCES.iter().find(|(_, s)| aliases(s).any(|a| a == name)).map(|(_, s)| *s)
}

fn aliases(src: &str) -> impl Iterator<Item = &str> {
    src.lines()
        .filter_map(|l| l.strip_prefix("aliases:"))
        .flat_map(|l| l.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// Parses, compiles and validates an entry.
pub fn get(name: &str) -> Result<Problem, CatalogError> {
    let src = source(name).ok_or_else(|| CatalogError::Unknown(name.to_string()))?;
    let doc = parse(src).map_err(|diag| CatalogError::Document { name: name.to_string(), diag })?;
    let p = compile(&doc).map_err(|diag| CatalogError::Document { name: name.to_string(), diag })?;
    let problems = validate(&p);
    if !problems.is_empty() {
        return Err(CatalogError::Invalid { name: p.name().to_string(), problems });
    }
    Ok(p)
}

/// Consistency of the objects stored in a document against its own
/// equation: the metric is conformal to the symbol, every sample solution
/// solves the equation, and the text survives a render round trip.
pub fn validate(p: &Problem) -> Vec<String> {
    let mut out = Vec::new();
    let text = dsl::render(&p.doc);
    match parse(&text) {
        Ok(d) if dsl::render(&d) == text => {}
        Ok(_) => out.push("render is not a fixpoint of parse".into()),
        Err(e) => out.push(format!("rendered document does not parse: {e}")),
    }
    if let (Some(eq), Some(g)) = (&p.equation, &p.metric) {
        match geometry::symbol_matrix(eq) {
            Ok(s) => {
                if let Err(e) = analysis::check_conformal_to_symbol(eq, g, &s) {
                    out.push(format!("metric: {e}"));
                }
            }
            Err(e) => out.push(format!("symbol: {e}")),
        }
    }
    if let Some(eq) = &p.equation {
        for s in &p.solutions {
            if !dsl::compile::solution_satisfies(eq, s) {
                out.push(format!("'{}' does not solve the equation", s.text));
            }
        }
    }
    out
}

/// Expectations of one entry, or the error that stopped it from loading.
#[derive(Debug)]
pub struct EntryOutcome {
    pub name: String,
    pub expectations: Vec<Expectation>,
    pub error: Option<String>,
}

impl EntryOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.expectations.iter().all(|e| e.met())
    }
}

/// Runs an entry's expectations; `tweak` adjusts the document's options.
pub fn run_entry(name: &str, tweak: &(dyn Fn(&mut CheckOptions) + Sync)) -> EntryOutcome {
    match get(name) {
        Ok(p) => {
            let mut opts = p.check_options();
            tweak(&mut opts);
            EntryOutcome { name: name.to_string(), expectations: runner::run_expectations(&p, &opts), error: None }
        }
        Err(e) => EntryOutcome { name: name.to_string(), expectations: Vec::new(), error: Some(e.to_string()) },
    }
}

/// Runs the given entries in parallel; results come back in input order.
pub fn run_many(names: &[&str], tweak: &(dyn Fn(&mut CheckOptions) + Sync)) -> Vec<EntryOutcome> {
    std::thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|n| std::thread::Builder::new().stack_size(64 << 20).spawn_scoped(s, move || run_entry(n, tweak)))
            .collect();
        handles
            .into_iter()
            .zip(names)
            .map(|(h, n)| {
                match h.map_err(|e| e.to_string()).and_then(|h| h.join().map_err(|_| "panicked".to_string())) {
                    Ok(o) => o,
                    Err(e) => EntryOutcome { name: n.to_string(), expectations: Vec::new(), error: Some(e) },
                }
            })
            .collect()
    })
}

pub fn run_all(tweak: &(dyn Fn(&mut CheckOptions) + Sync)) -> Vec<EntryOutcome> {
    run_many(&list(), tweak)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_sorted_and_every_file_is_listed() {
        let names = list();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("catalog");
        let mut files: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
            .collect();
        files.sort();
        assert_eq!(files, names);
        assert!(names.contains(&"dkp") && names.contains(&"general-heavenly"));
    }

    #[test]
    fn every_entry_loads_and_validates() {
        for n in list() {
            let p = get(n).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(p.name(), n);
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(get("bf").unwrap().name(), "boyer-finley");
        assert!(matches!(get("nope"), Err(CatalogError::Unknown(_))));
    }
}
