//! Trial data files: comma-separated with header `group,stage,value`;
//! group is x or y, stage is 1 or 2, value a decimal literal.

use std::path::Path;

use twostage_mw_core::ustat::TwoStageData;

#[derive(Debug)]
pub struct DataError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", "data", self.line, self.message)
    }
}

pub fn parse_trial_csv(path: &Path) -> Result<TwoStageData, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
    let mut x1 = Vec::new();
    let mut y1 = Vec::new();
    let mut x2 = Vec::new();
    let mut y2 = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "group,stage,value" => {}
        Some((_, header)) => {
            return Err(DataError {
                line: 1,
                message: format!("expected header 'group,stage,value', got {header:?}"),
            })
        }
        None => return Err(DataError { line: 1, message: "empty file".into() }),
    }
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(DataError {
                line: lineno,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|e| DataError {
            line: lineno,
            message: format!("bad value {:?}: {e}", fields[2]),
        })?;
        match (fields[0], fields[1]) {
            ("x", "1") => x1.push(value),
            ("x", "2") => x2.push(value),
            ("y", "1") => y1.push(value),
            ("y", "2") => y2.push(value),
            (g, s) => {
                return Err(DataError {
                    line: lineno,
                    message: format!("expected group x|y and stage 1|2, got ({g:?}, {s:?})"),
                })
            }
        }
    }
    TwoStageData::new(x1, y1, x2, y2)
        .map_err(|e| DataError { line: 0, message: format!("invalid trial data: {e}") })
}
