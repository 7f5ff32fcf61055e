use tdual_core::abelian::FgAbGroup;
use tdual_core::hori;
use tdual_core::ktheory::{
    self, ahss, check_orbit, normal_form, orbits_in_box, predicted_torsion, resolve_k, KParity, KResolution,
    KResult, KTheoryError, Move, TwistPair, TwistedCohDatum,
};
use tdual_core::localsys::{cohomology, euler_characteristic, LocalSystem, LocalSystemError};
use tdual_core::lsss::{self, EntryStatus, ExtensionPolicy, Family, Resolution, SpectralError, SpectralPage};
use tdual_core::reference::{self, CellStatus, Quantity, ReferenceError, ReferenceTables};
use tdual_core::tdual::{self, TDualError};
use thiserror::Error;

use crate::config::{ConfigError, FamilyConfig, WorkbenchConfig};
use crate::report::{LedgerNote, Report, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("undetermined: {0}")]
    Undetermined(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 1,
            CliError::Undetermined(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<LocalSystemError> for CliError {
    fn from(e: LocalSystemError) -> Self {
        match e {
            LocalSystemError::Abelian(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::LocalSystem(l) => l.into(),
            SpectralError::InvalidBundle(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<TDualError> for CliError {
    fn from(e: TDualError) -> Self {
        match e {
            TDualError::NotDualizable(_) | TDualError::CoefficientMismatch(_) => CliError::Input(e.to_string()),
            TDualError::UnsupportedNonOrientableVertical(_) => CliError::Undetermined(e.to_string()),
            TDualError::Spectral(s) => s.into(),
            TDualError::LocalSystem(l) => l.into(),
            TDualError::Abelian(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<KTheoryError> for CliError {
    fn from(e: KTheoryError) -> Self {
        match e {
            KTheoryError::ShiftUndefined(_)
            | KTheoryError::Sq3Unjustified { .. }
            | KTheoryError::GradedTwistUnsupported
            | KTheoryError::InvalidDatum(_) => CliError::Input(e.to_string()),
            KTheoryError::Spectral(s) => s.into(),
            KTheoryError::TDual(t) => t.into(),
            KTheoryError::LocalSystem(l) => l.into(),
            KTheoryError::Internal(_) | KTheoryError::Abelian(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        match e {
            ReferenceError::KTheory(k) => k.into(),
            ReferenceError::Spectral(s) => s.into(),
            ReferenceError::LocalSystem(l) => l.into(),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub family: Option<String>,
    pub orbit: Option<TwistPair>,
    pub seed: Option<u64>,
    pub strict: bool,
}

fn strs(v: &[FgAbGroup]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn degree_columns<'a>(first: &'a str, d: usize, prefix: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain((0..=d).map(|i| format!("{prefix}{i}"))).collect()
}

fn table_with(title: &str, columns: Vec<String>) -> Table {
    Table { title: title.into(), columns, rows: Vec::new() }
}

fn ledger(family: &Family, pair: TwistPair, quantities: &[Quantity]) -> Result<Vec<LedgerNote>, CliError> {
    let mut tables = ReferenceTables::builtin()?;
    tables.entries.retain(|e| quantities.contains(&e.quantity));
    let audit = reference::audit(&tables, &[(family.clone(), pair)])?;
    Ok(audit.rows.into_iter().filter(|r| r.status != CellStatus::Agrees).map(note).collect())
}

fn note(r: reference::AuditRow) -> LedgerNote {
    let justification = match r.status {
        CellStatus::Documented => r.justification.unwrap_or_default(),
        CellStatus::Unexplained => "UNEXPLAINED: no documented deviation".into(),
        CellStatus::Stale => "STALE: listed as a deviation but the values agree".into(),
        CellStatus::Agrees => String::new(),
    };
    LedgerNote {
        id: r.id,
        pair: r.pair.to_string(),
        cell: r.cell,
        printed: r.printed.to_string(),
        derived: r.derived.to_string(),
        source: r.source,
        justification,
    }
}

/// Applies `--family` and returns the catalog family, if any.
fn resolve_family(cfg: &mut WorkbenchConfig, ov: &Overrides) -> Result<Option<Family>, CliError> {
    if let Some(id) = &ov.family {
        let (m, n) = cfg.family.as_ref().filter(|f| &f.id == id).map_or((None, None), |f| (f.m, f.n));
        cfg.family = Some(FamilyConfig { id: id.clone(), m, n });
    }
    Ok(cfg.catalog_family()?)
}

/// Twist pair of a catalog-family config with a Chern coordinate.
fn config_pair(cfg: &WorkbenchConfig) -> Option<TwistPair> {
    let j = *cfg.chern.as_ref()?.first()?;
    let k = cfg.flux.as_ref().and_then(|f| f.k.first().copied()).unwrap_or(0);
    Some(TwistPair::new(j, k))
}

pub fn cohomology_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let family = resolve_family(&mut cfg, ov)?;
    let lambda = cfg.local_system()?;
    let d = lambda.base.dimension();
    let mut t = table_with("cohomology of the base", degree_columns("coefficients", d, "H^"));
    t.columns.push("chi".into());
    let rows: [(&str, LocalSystem); 3] = [
        ("Z", LocalSystem::trivial(lambda.base.clone(), 1)),
        ("Λ", lambda.clone()),
        ("Λ*", lambda.dual()),
    ];
    for (label, sys) in rows {
        let groups = cohomology(&sys)?.groups();
        let mut row = vec![label.to_string()];
        row.extend(strs(&groups));
        row.push(euler_characteristic(&groups).to_string());
        t.push(row);
    }
    let mut report = Report::new("cohomology", cfg);
    report.tables.push(t);
    if let Some(f) = family {
        report.ledger = ledger(&f, TwistPair::new(1, 1), &[Quantity::BaseTwisted, Quantity::BaseUntwisted])?;
    }
    Ok(report)
}

fn page_table(title: &str, page: &SpectralPage) -> Table {
    let mut t = table_with(title, degree_columns("q\\p", page.base_dim, ""));
    for q in (0..=page.fiber_rank).rev() {
        let mut row = vec![q.to_string()];
        for p in 0..=page.base_dim {
            let cell = match page.entry(p, q) {
                Some(e) if e.status == EntryStatus::Undetermined => format!("{}?", e.group()),
                Some(e) => e.group().to_string(),
                None => "0".into(),
            };
            row.push(cell);
        }
        t.push(row);
    }
    t
}

pub fn bundle_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let family = resolve_family(&mut cfg, ov)?;
    let bundle = cfg.bundle()?;
    let run = lsss::run(&bundle)?;
    let total = lsss::total_cohomology(&run.einf, ExtensionPolicy::PdAssisted)?;
    let mut report = Report::new("bundle", cfg.clone());
    report.tables.push(page_table("E2 page", &run.e2));
    report.tables.push(page_table("E3 page", &run.e3));
    report.tables.push(page_table("E∞ page", &run.einf));
    let mut h = Table::new("cohomology of the total space", &["degree", "group", "pieces", "resolution", "determined"]);
    for deg in &total.degrees {
        let pieces: Vec<String> = deg.pieces.iter().map(|(p, q, g)| format!("E{p},{q}={g}")).collect();
        let res = match deg.resolution {
            Resolution::Unique => "unique",
            Resolution::SplitAssumed => "split-assumed",
            Resolution::PoincareDuality => "poincare-duality",
        };
        h.push(vec![
            deg.degree.to_string(),
            deg.assembled.to_string(),
            pieces.join("; "),
            res.into(),
            if deg.undetermined { "no" } else { "yes" }.into(),
        ]);
    }
    report.tables.push(h);
    report.notes.push(format!(
        "dimension {}, {}, euler characteristic {}",
        total.dimension,
        if total.orientable { "orientable" } else { "non-orientable" },
        total.euler_characteristic()
    ));
    if total.degrees.iter().any(|d| d.extension_ambiguous()) {
        report.notes.push("split-assumed degrees report the direct sum of their graded pieces".into());
    }
    report.undetermined = !total.is_determined();
    if let (Some(f), Some(pair)) = (family, config_pair(&cfg)) {
        report.ledger = ledger(&f, pair, &[Quantity::Total])?;
    }
    Ok(report)
}

fn pass(b: bool) -> String {
    if b { "pass" } else { "FAIL" }.into()
}

fn join(v: &[String]) -> String {
    format!("[{}]", v.join(","))
}

pub fn dualize_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let family = resolve_family(&mut cfg, ov)?;
    let bundle = cfg.bundle()?;
    let flux = cfg.flux_datum(&bundle)?;
    let pair = tdual::dualize(&bundle, &flux, ov.strict)?;
    let involutive = tdual::involution_check(&bundle, &flux)?;
    let s = pair.summary();
    let bits = |v: &[bool]| join(&v.iter().map(|b| u8::from(*b).to_string()).collect::<Vec<_>>());
    let monodromy = |l: &LocalSystem| {
        l.monodromies
            .iter()
            .map(|m| join(&(0..m.rows()).map(|r| join(&strs_big(&m.row(r)))).collect::<Vec<_>>()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut t = Table::new("T-dual pair", &["quantity", "original", "dual"]);
    if family.is_some() {
        let (j, k) = (s.chern.first().cloned().unwrap_or_default(), s.flux_k.first().cloned().unwrap_or_default());
        let (dj, dk) =
            (s.dual_chern.first().cloned().unwrap_or_default(), s.dual_flux_k.first().cloned().unwrap_or_default());
        t.push(vec!["twist pair".into(), format!("({j},{k})"), format!("({dj},{dk})")]);
    }
    t.push(vec!["monodromy".into(), monodromy(&bundle.lambda), monodromy(&pair.dual_bundle.lambda)]);
    t.push(vec!["chern".into(), join(&s.chern), join(&s.dual_chern)]);
    t.push(vec!["flux k".into(), join(&s.flux_k), join(&s.dual_flux_k)]);
    t.push(vec!["flux h3".into(), join(&s.flux_h3), join(&s.dual_flux_h3)]);
    t.push(vec!["xi".into(), bits(&s.xi), bits(&s.dual_xi)]);

    let r = &s.report;
    let mut rel = Table::new("relations", &["relation", "status"]);
    rel.push(vec!["monodromy is dual".into(), pass(r.monodromy_dual)]);
    rel.push(vec!["xi^ = xi + w1".into(), pass(r.xi_transport)]);
    rel.push(vec!["c cup c^ = 0".into(), pass(r.chern_product_vanishes)]);
    rel.push(vec!["[h] = [c^]".into(), pass(r.flux_matches_dual_chern)]);
    rel.push(vec!["[h^] = [c]".into(), pass(r.dual_flux_matches_chern)]);
    rel.push(vec!["W3 term".into(), if r.w3_skipped { "skipped" } else { "not needed" }.into()]);
    rel.push(vec!["dualizing twice is the identity".into(), pass(involutive)]);

    let mut report = Report::new("dualize", cfg);
    report.tables.push(t);
    report.tables.push(rel);
    report.notes.extend(s.notes.clone());
    if !r.all_pass() {
        report.internal_failures.push("exchange relations fail on a constructed pair".into());
    }
    if !involutive {
        report.internal_failures.push("dualizing twice does not return the input".into());
    }
    Ok(report)
}

fn strs_big(v: &[num_bigint::BigInt]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

pub fn selftest_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let mut st = cfg.selftest.clone().unwrap_or_default();
    if let Some(seed) = ov.seed {
        st.seed = seed;
    }
    if st.max_n + 2 * st.max_m > 24 {
        return Err(ConfigError::field("selftest", "max_m and max_n allow at most 24 generators").into());
    }
    cfg.selftest = Some(st.clone());
    let result = hori::self_test(&st).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut checks = Table::new("Hori self-test", &["check", "cases", "failures", "first failure"]);
    for c in &result.checks {
        checks.push(vec![
            c.name.clone(),
            c.cases.to_string(),
            c.failures.to_string(),
            c.first_failure.clone().unwrap_or_else(|| "-".into()),
        ]);
    }
    let mut signs = Table::new("double transform sign", &["m", "n", "base degree", "fiber degree", "sign"]);
    for s in &result.double_transform_signs {
        signs.push(vec![
            s.m.to_string(),
            s.n.to_string(),
            s.base_degree.to_string(),
            s.fiber_degree.to_string(),
            s.sign.to_string(),
        ]);
    }
    let mut report = Report::new("hori-selftest", cfg);
    report.tables.push(checks);
    report.tables.push(signs);
    report.notes.push(format!("seed {}", st.seed));
    for c in result.checks.iter().filter(|c| !c.passed()) {
        report.internal_failures.push(format!("{}: {} of {} cases fail", c.name, c.failures, c.cases));
    }
    Ok(report)
}

fn pieces_cell(kp: &KParity) -> String {
    let v: Vec<String> = kp
        .pieces
        .iter()
        .map(|p| format!("{}@{}{}", p.group, p.degree, if p.undetermined { "?" } else { "" }))
        .collect();
    if v.is_empty() {
        "0".into()
    } else {
        v.join("; ")
    }
}

fn resolution_cell(r: KResolution) -> String {
    match r {
        KResolution::Settled => "settled".into(),
        KResolution::Orbit(p) => format!("orbit via {p}"),
        KResolution::SplitAssumed => "split-assumed".into(),
    }
}

fn k_notes(report: &mut Report, pair: Option<TwistPair>, r: &KResult) {
    let at = pair.map_or_else(String::new, |p| format!("{p}: "));
    if !r.possible_higher_differentials.is_empty() {
        let v: Vec<String> = r.possible_higher_differentials.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        report.notes.push(format!("{at}higher differentials may be nonzero: {}", v.join(", ")));
    }
    if r.filtration_corrections_ignored {
        report.notes.push(format!("{at}d3 computed on graded pieces; filtration corrections ignored"));
    }
}

fn e4_row(label: String, r: &KResult) -> Vec<String> {
    std::iter::once(label).chain(strs(&r.e4)).collect()
}

pub fn ktheory_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let family = resolve_family(&mut cfg, ov)?;
    if cfg.flux.as_ref().and_then(|f| f.xi.as_ref()).is_some_and(|xi| xi.iter().any(|b| *b)) {
        return Err(KTheoryError::GradedTwistUnsupported.into());
    }
    let Some(family) = family else {
        return ktheory_from_bundle(cfg);
    };
    let mut pairs: Vec<TwistPair> = match ov.orbit {
        Some(p) => vec![p],
        None => cfg.ktheory.as_ref().map(|k| k.pairs.iter().map(|[j, k]| TwistPair::new(*j, *k)).collect()).unwrap_or_default(),
    };
    if pairs.is_empty() {
        pairs.extend(config_pair(&cfg));
    }
    if pairs.is_empty() {
        return Err(ConfigError::field("ktheory.pairs", "no pairs (give `ktheory.pairs`, `chern`/`flux`, or --orbit)").into());
    }
    let mut report = Report::new("ktheory", cfg.clone());
    let dim = family.bundle(0)?.total_dimension();
    let mut kt = Table::new("twisted K-theory", &["pair", "gcd", "K^0", "K^0 via", "K^1", "K^1 via"]);
    let mut e4 = table_with("E4 page", degree_columns("pair", dim, "E4^"));
    for &pair in &pairs {
        let own = ahss(&TwistedCohDatum::for_family(&family, pair)?)?;
        let [k0, k1] = resolve_k(&family, pair)?;
        report.undetermined |= k0.undetermined || k1.undetermined;
        let mark = |u: bool| if u { "?" } else { "" };
        kt.push(vec![
            pair.to_string(),
            pair.gcd().to_string(),
            format!("{}{}", k0.group, mark(k0.undetermined)),
            resolution_cell(k0.resolution),
            format!("{}{}", k1.group, mark(k1.undetermined)),
            resolution_cell(k1.resolution),
        ]);
        e4.push(e4_row(pair.to_string(), &own));
        k_notes(&mut report, Some(pair), &own);
        report.ledger.extend(ledger(&family, pair, &[Quantity::K0, Quantity::K1])?);
    }
    report.tables.push(kt);
    report.tables.push(e4);

    if let Some(pair) = ov.orbit {
        orbit_tables(&mut report, &family, pair, cfg.ktheory.as_ref().and_then(|k| k.orbit_box))?;
    }
    Ok(report)
}

fn orbit_tables(
    report: &mut Report,
    family: &Family,
    pair: TwistPair,
    orbit_box: Option<[i64; 2]>,
) -> Result<(), CliError> {
    let nf = normal_form(pair);
    if nf.replay()? != nf.pair {
        report.internal_failures.push(format!("normal form moves of {pair} do not replay"));
    }
    let mut steps = Table::new("normal form", &["step", "move", "pair"]);
    steps.push(vec!["0".into(), "start".into(), pair.to_string()]);
    let mut cur = pair;
    for (i, mv) in nf.moves.iter().enumerate() {
        cur = ktheory::apply_move(cur, *mv)?;
        let name = match mv {
            Move::Swap => "swap".to_string(),
            Move::Shift { times } => format!("shift x{times}"),
            Move::Negate => "negate".to_string(),
        };
        steps.push(vec![(i + 1).to_string(), name, cur.to_string()]);
    }
    report.tables.push(steps);

    let [lo, hi] = orbit_box.unwrap_or([0, pair.j.abs().max(pair.k.abs())]);
    if lo > hi {
        return Err(ConfigError::field("ktheory.orbit_box", "lower bound exceeds upper bound").into());
    }
    let orbit = orbits_in_box(family, lo, hi).into_iter().find(|o| o.contains(&pair));
    let Some(orbit) = orbit else {
        report.notes.push(format!("{pair} lies outside the orbit box [{lo},{hi}]"));
        return Ok(());
    };
    let mut members = Vec::with_capacity(orbit.len());
    let mut mt = Table::new("orbit members", &["pair", "K^0 pieces", "K^1 pieces"]);
    for p in orbit {
        let r = ahss(&TwistedCohDatum::for_family(family, p)?)?;
        mt.push(vec![p.to_string(), pieces_cell(&r.k0), pieces_cell(&r.k1)]);
        members.push((p, r));
    }
    let check = check_orbit(&members, predicted_torsion(family, pair.gcd()));
    let mut ct = Table::new("orbit check", &["parity", "free rank", "pieces constant", "settled", "expected", "violations"]);
    for p in &check.parities {
        ct.push(vec![
            format!("K^{}", p.parity),
            p.free_rank.map_or_else(|| "-".into(), |r| r.to_string()),
            if p.pieces_constant { "yes" } else { "no" }.into(),
            p.settled.as_ref().map_or_else(|| "-".into(), ToString::to_string),
            p.expected.as_ref().map_or_else(|| "-".into(), ToString::to_string),
            p.violations.len().to_string(),
        ]);
        for v in &p.violations {
            report.internal_failures.push(format!("orbit of {pair}: {v}"));
        }
    }
    report.notes.push(format!("orbit of {pair} in [{lo},{hi}]^2 has {} members, normal form {}", members.len(), nf.pair));
    report.tables.push(mt);
    report.tables.push(ct);
    Ok(())
}

fn ktheory_from_bundle(cfg: WorkbenchConfig) -> Result<Report, CliError> {
    let bundle = cfg.bundle()?;
    let flux = cfg.flux_datum(&bundle)?;
    let r = ahss(&TwistedCohDatum::from_pipeline(&bundle, &flux)?)?;
    let mut report = Report::new("ktheory", cfg);
    let mut kt = Table::new("twisted K-theory", &["parity", "group", "pieces", "extension", "determined"]);
    for (i, kp) in [&r.k0, &r.k1].into_iter().enumerate() {
        kt.push(vec![
            format!("K^{i}"),
            kp.assembled.to_string(),
            pieces_cell(kp),
            if kp.extension_ambiguous { "split-assumed" } else { "unique" }.into(),
            if kp.undetermined { "no" } else { "yes" }.into(),
        ]);
        report.undetermined |= kp.undetermined;
    }
    let mut e4 = table_with("E4 page", degree_columns("pair", r.e4.len() - 1, "E4^"));
    e4.push(e4_row("-".into(), &r));
    report.tables.push(kt);
    report.tables.push(e4);
    k_notes(&mut report, None, &r);
    Ok(report)
}

pub fn tables_cmd(mut cfg: WorkbenchConfig, ov: &Overrides) -> Result<Report, CliError> {
    let family = resolve_family(&mut cfg, ov)?;
    let pairs: Vec<TwistPair> = cfg
        .ktheory
        .as_ref()
        .map(|k| k.pairs.iter().map(|[j, k]| TwistPair::new(*j, *k)).collect())
        .unwrap_or_default();
    let samples: Vec<(Family, TwistPair)> = match (&family, pairs.is_empty()) {
        (Some(f), false) => pairs.into_iter().map(|p| (f.clone(), p)).collect(),
        (Some(f), true) => reference::default_samples().into_iter().filter(|(g, _)| g.id() == f.id()).map(|(_, p)| (f.clone(), p)).collect(),
        (None, _) => reference::default_samples(),
    };
    let tables = ReferenceTables::builtin()?;
    let audit = reference::audit(&tables, &samples)?;
    let mut t = Table::new("reference tables", &["family", "entry", "pair", "cell", "printed", "derived", "status"]);
    for r in &audit.rows {
        let status = match r.status {
            CellStatus::Agrees => "agrees",
            CellStatus::Documented => "deviation",
            CellStatus::Unexplained => "UNEXPLAINED",
            CellStatus::Stale => "STALE",
        };
        t.push(vec![
            r.family.clone(),
            r.id.clone(),
            r.pair.to_string(),
            r.cell.to_string(),
            r.printed.to_string(),
            r.derived.to_string(),
            status.into(),
        ]);
    }
    let mut report = Report::new("tables", cfg);
    report.tables.push(t);
    report.notes.push(format!(
        "{} cells: {} agree, {} documented deviations",
        audit.rows.len(),
        audit.count(CellStatus::Agrees),
        audit.count(CellStatus::Documented)
    ));
    for r in audit.rows.iter().filter(|r| matches!(r.status, CellStatus::Unexplained | CellStatus::Stale)) {
        report.internal_failures.push(format!("{} {} cell {}: {:?}", r.id, r.pair, r.cell, r.status));
    }
    report.ledger = audit.rows.into_iter().filter(|r| r.status != CellStatus::Agrees).map(note).collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let internal: CliError = KTheoryError::Internal("rank bookkeeping".into()).into();
        assert_eq!(internal.exit_code(), 3);
        let input: CliError = KTheoryError::ShiftUndefined(TwistPair::new(0, 3)).into();
        assert_eq!(input.exit_code(), 1);
        let strict: CliError = TDualError::UnsupportedNonOrientableVertical(vec![true]).into();
        assert_eq!(strict.exit_code(), 2);
        let nested: CliError = KTheoryError::TDual(TDualError::NotDualizable(vec![])).into();
        assert_eq!(nested.exit_code(), 1);
    }
}
