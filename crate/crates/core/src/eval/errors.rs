use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sparql::{extract_entities, extract_properties, EntityId, Multiset, Query, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    MissingProperty,
    ExtraProperty,
    WrongProperty,
    MissingEntity,
    ExtraEntity,
    WrongEntity,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::MissingProperty,
        ErrorCategory::ExtraProperty,
        ErrorCategory::WrongProperty,
        ErrorCategory::MissingEntity,
        ErrorCategory::ExtraEntity,
        ErrorCategory::WrongEntity,
    ];
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorProfile {
    pub missing_property: bool,
    pub extra_property: bool,
    pub wrong_property: bool,
    pub missing_entity: bool,
    pub extra_entity: bool,
    pub wrong_entity: bool,
    pub multiple_errors: bool,
    pub unparseable: bool,
    /// The prediction differs from the gold query but both multisets agree:
    /// the error lies in structure (argument order, variables, triple order).
    pub structural_only: bool,
}

impl ErrorProfile {
    pub fn unparseable() -> Self {
        ErrorProfile { unparseable: true, ..Self::default() }
    }

    pub fn has(&self, c: ErrorCategory) -> bool {
        match c {
            ErrorCategory::MissingProperty => self.missing_property,
            ErrorCategory::ExtraProperty => self.extra_property,
            ErrorCategory::WrongProperty => self.wrong_property,
            ErrorCategory::MissingEntity => self.missing_entity,
            ErrorCategory::ExtraEntity => self.extra_entity,
            ErrorCategory::WrongEntity => self.wrong_entity,
        }
    }

    pub fn categories(&self) -> Vec<ErrorCategory> {
        ErrorCategory::ALL.into_iter().filter(|&c| self.has(c)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.categories().is_empty() && !self.unparseable && !self.structural_only
    }
}

/// (missing, extra, wrong) for one family of multisets.
fn compare<T: Ord>(gold: &Multiset<T>, pred: &Multiset<T>) -> (bool, bool, bool) {
    let g: usize = gold.values().sum();
    let p: usize = pred.values().sum();
    (p < g, p > g, p == g && gold != pred)
}

/// Classifies a prediction by its property and entity multisets. `pred` is
/// `None` when the prediction did not parse. Entities for which
/// `exclude_entity` holds are left out of the entity comparison.
pub fn categorize_errors_with(
    gold: &Query,
    pred: Option<&Query>,
    exclude_entity: impl Fn(EntityId) -> bool,
) -> ErrorProfile {
    let Some(pred) = pred else {
        return ErrorProfile::unparseable();
    };
    let (Ok(pg), Ok(pp), Ok(eg), Ok(ep)) =
        (extract_properties(gold), extract_properties(pred), extract_entities(gold), extract_entities(pred))
    else {
        return ErrorProfile::unparseable();
    };
    let keep = |m: Multiset<Term>| -> Multiset<Term> {
        m.into_iter().filter(|(t, _)| !t.as_entity().is_some_and(&exclude_entity)).collect()
    };
    let (eg, ep) = (keep(eg), keep(ep));
    let (missing_property, extra_property, wrong_property) = compare(&pg, &pp);
    let (missing_entity, extra_entity, wrong_entity) = compare(&eg, &ep);
    let mut profile = ErrorProfile {
        missing_property,
        extra_property,
        wrong_property,
        missing_entity,
        extra_entity,
        wrong_entity,
        ..ErrorProfile::default()
    };
    let raised = profile.categories().len();
    profile.multiple_errors = raised >= 2;
    profile.structural_only = raised == 0 && gold.to_string() != pred.to_string();
    profile
}

/// [`categorize_errors_with`] counting every entity.
pub fn categorize_errors(gold: &Query, pred: Option<&Query>) -> ErrorProfile {
    categorize_errors_with(gold, pred, |_| false)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    pub runs: usize,
    pub profiles: usize,
    pub totals: BTreeMap<ErrorCategory, usize>,
    pub multiple_errors: usize,
    pub unparseable: usize,
    pub structural_only: usize,
    /// Per-category totals divided by the number of runs, unrounded.
    pub means: BTreeMap<ErrorCategory, f64>,
    pub mean_multiple_errors: f64,
    pub mean_unparseable: f64,
}

/// Sums flags over all runs and averages per run.
pub fn error_report(runs: &[Vec<ErrorProfile>]) -> ErrorReport {
    let mut report = ErrorReport { runs: runs.len(), ..ErrorReport::default() };
    for c in ErrorCategory::ALL {
        report.totals.insert(c, 0);
    }
    for p in runs.iter().flatten() {
        report.profiles += 1;
        for c in p.categories() {
            *report.totals.get_mut(&c).expect("initialized") += 1;
        }
        report.multiple_errors += p.multiple_errors as usize;
        report.unparseable += p.unparseable as usize;
        report.structural_only += p.structural_only as usize;
    }
    let k = runs.len().max(1) as f64;
    report.means = report.totals.iter().map(|(&c, &n)| (c, n as f64 / k)).collect();
    report.mean_multiple_errors = report.multiple_errors as f64 / k;
    report.mean_unparseable = report.unparseable as f64 / k;
    report
}
