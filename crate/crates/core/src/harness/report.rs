use std::fmt::Write;

use crate::error::{Error, Result};
use crate::metrics::{MatrixCell, RobustnessMatrix};

/// Rows whose every class exceeds this Dice are marked in Markdown.
pub const HIGHLIGHT_THRESHOLD: f64 = 0.9;
pub const ROW_MARK: &str = "✓";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn class_header(num_classes: usize) -> String {
    (1..=num_classes)
        .map(|k| format!("class_{k}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn complete_row(matrix: &RobustnessMatrix, model: usize) -> Result<Vec<&MatrixCell>> {
    matrix.cells[model]
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            cell.as_ref().ok_or_else(|| {
                Error::IncompleteMatrix(format!(
                    "{} x {} is missing",
                    matrix.models[model], matrix.conditions[c]
                ))
            })
        })
        .collect()
}

/// One model's table as CSV: `condition,class_1..class_C`, 4 decimals.
pub fn model_csv(matrix: &RobustnessMatrix, model: usize) -> Result<String> {
    let row = complete_row(matrix, model)?;
    let mut out = format!("condition,{}\n", class_header(matrix.num_classes));
    for (cond, cell) in matrix.conditions.iter().zip(row) {
        let values: Vec<String> = cell.dice.iter().map(|&v| fmt4(v)).collect();
        writeln!(out, "{cond},{}", values.join(",")).unwrap();
    }
    Ok(out)
}

fn model_markdown(matrix: &RobustnessMatrix, model: usize) -> Result<String> {
    let row = complete_row(matrix, model)?;
    let mut out = format!("### {}\n\n", matrix.models[model]);
    let classes: Vec<String> = (1..=matrix.num_classes).map(|k| k.to_string()).collect();
    writeln!(out, "|   | condition | {} |", classes.join(" | ")).unwrap();
    writeln!(out, "|---|---|{}", "---|".repeat(matrix.num_classes)).unwrap();
    for (cond, cell) in matrix.conditions.iter().zip(row) {
        let mark = if cell.dice.iter().all(|&v| v > HIGHLIGHT_THRESHOLD) {
            ROW_MARK
        } else {
            " "
        };
        let values: Vec<String> = cell
            .dice
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if cell.subjects > 0 && cell.both_empty.get(k) == Some(&cell.subjects) {
                    "—".to_string()
                } else {
                    fmt4(v)
                }
            })
            .collect();
        writeln!(out, "| {mark} | {cond} | {} |", values.join(" | ")).unwrap();
    }
    Ok(out)
}

/// Tables for every model. CSV is one long table with a leading `model`
/// column; Markdown is one section per model with `✓` on rows where every
/// class is above 0.9.
pub fn emit_report(matrix: &RobustnessMatrix, format: ReportFormat) -> Result<String> {
    if let Some((m, c)) = matrix.first_missing() {
        return Err(Error::IncompleteMatrix(format!("{m} x {c} is missing")));
    }
    match format {
        ReportFormat::Csv => {
            let mut out = format!("model,condition,{}\n", class_header(matrix.num_classes));
            for (m, name) in matrix.models.iter().enumerate() {
                for line in model_csv(matrix, m)?.lines().skip(1) {
                    writeln!(out, "{name},{line}").unwrap();
                }
            }
            Ok(out)
        }
        ReportFormat::Markdown => {
            let mut sections = Vec::new();
            for m in 0..matrix.models.len() {
                sections.push(model_markdown(matrix, m)?);
            }
            Ok(sections.join("\n"))
        }
    }
}

/// Parses either CSV layout back into a matrix of 4-decimal values.
pub fn parse_csv(text: &str) -> Result<RobustnessMatrix> {
    let bad = |m: String| Error::InvalidParameter(format!("matrix CSV: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty".into()))?.split(',').collect();
    let long = header.first() == Some(&"model");
    let skip = if long { 2 } else { 1 };
    if header.get(skip - 1) != Some(&"condition") {
        return Err(bad("missing condition column".into()));
    }
    let num_classes = header.len() - skip;
    let mut models: Vec<String> = Vec::new();
    let mut conditions: Vec<String> = Vec::new();
    let mut entries: Vec<(String, String, Vec<f64>)> = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(bad(format!("row {line:?} has {} fields", fields.len())));
        }
        let model = if long { fields[0].to_string() } else { String::new() };
        let cond = fields[skip - 1].to_string();
        let values = fields[skip..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if !models.contains(&model) {
            models.push(model.clone());
        }
        if !conditions.contains(&cond) {
            conditions.push(cond.clone());
        }
        entries.push((model, cond, values));
    }
    let mut matrix = RobustnessMatrix::new(models, conditions, num_classes);
    for (model, cond, dice) in entries {
        let m = matrix.model_index(&model).unwrap();
        let c = matrix.condition_index(&cond).unwrap();
        matrix.cells[m][c] = Some(MatrixCell {
            both_empty: vec![0; dice.len()],
            dice,
            subjects: 0,
        });
    }
    Ok(matrix)
}
