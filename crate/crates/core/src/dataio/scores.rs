//! Scores CSV: `case_id,patient_id,p:<class>...[,y:<class>...]`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

use super::ScoredCase;

fn expected_header(taxonomy: &Taxonomy, labeled: bool) -> Vec<String> {
    let mut cols = vec!["case_id".to_string(), "patient_id".to_string()];
    cols.extend(taxonomy.ids().map(|id| format!("p:{id}")));
    if labeled {
        cols.extend(taxonomy.ids().map(|id| format!("y:{id}")));
    }
    cols
}

fn check_header(found: &csv::StringRecord, taxonomy: &Taxonomy) -> Result<bool> {
    if found.get(0) != Some("case_id") || found.get(1) != Some("patient_id") {
        return Err(Error::input(
            "scores file must start with columns case_id,patient_id",
        ));
    }
    let labeled = found.len() > 2 + taxonomy.len();
    let expected = expected_header(taxonomy, labeled);
    for (i, want) in expected.iter().enumerate() {
        match found.get(i) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::validation(format!(
                    "scores column {} is {got:?}, expected {want:?}",
                    i + 1
                )))
            }
            None => {
                return Err(Error::validation(format!(
                    "scores file is missing column {want}"
                )))
            }
        }
    }
    if found.len() > expected.len() {
        return Err(Error::validation(format!(
            "unexpected scores column {:?}",
            &found[expected.len()]
        )));
    }
    Ok(labeled)
}

/// Parses a scores CSV against `taxonomy`. Rows keep file order.
pub fn read_scores(text: &str, taxonomy: &Taxonomy) -> Result<Vec<ScoredCase>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::input("scores file has no header"));
    }
    let labeled = check_header(&header, taxonomy)?;
    let width = taxonomy.len();

    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let case_id = record[0].to_string();
        if case_id.is_empty() {
            return Err(Error::input(format!("line {line}: empty case_id")));
        }
        if !seen.insert(case_id.clone()) {
            return Err(Error::input(format!(
                "line {line}: duplicate case_id {case_id:?}"
            )));
        }
        let patient = Some(record[1].to_string()).filter(|p| !p.is_empty());

        let mut scores = Vec::with_capacity(width);
        for j in 0..width {
            let col = &header[2 + j];
            let field = &record[2 + j];
            let p: f64 = field.parse().map_err(|_| {
                Error::input(format!(
                    "line {line}, column {col}: {field:?} is not a number"
                ))
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::input(format!(
                    "line {line}, column {col}: score {p} is outside [0, 1]"
                )));
            }
            scores.push(p);
        }
        let labels = if labeled {
            let mut labels = Vec::with_capacity(width);
            for j in 0..width {
                let col = &header[2 + width + j];
                labels.push(match &record[2 + width + j] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::input(format!(
                            "line {line}, column {col}: label {other:?} is not 0 or 1"
                        )))
                    }
                });
            }
            Some(labels)
        } else {
            None
        };
        cases.push(ScoredCase::new(case_id, patient, scores, labels)?);
    }
    Ok(cases)
}

/// Renders cases as a scores CSV. Label columns are written when every case
/// is labeled; a mix of labeled and unlabeled cases is an error.
pub fn write_scores(cases: &[ScoredCase], taxonomy: &Taxonomy) -> Result<String> {
    super::check_width(cases, taxonomy.len())?;
    let labeled_count = cases.iter().filter(|c| c.labels().is_some()).count();
    if labeled_count != 0 && labeled_count != cases.len() {
        return Err(Error::input(
            "cannot write a scores file mixing labeled and unlabeled cases",
        ));
    }
    let labeled = !cases.is_empty() && labeled_count == cases.len();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(expected_header(taxonomy, labeled))?;
    for case in cases {
        let mut record = vec![
            case.case_id().to_string(),
            case.patient_id().unwrap_or("").to_string(),
        ];
        record.extend(case.scores().iter().map(|p| p.to_string()));
        if let Some(labels) = case.labels() {
            record.extend(
                labels
                    .iter()
                    .map(|&y| if y { "1" } else { "0" }.to_string()),
            );
        }
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}
