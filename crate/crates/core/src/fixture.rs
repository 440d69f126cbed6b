//! Text fixtures for scheduling instances.
//!
//! The format is line oriented UTF-8; `#` starts a comment and blank lines
//! are skipped. In order:
//!
//! ```text
//! nurses=<n> patterns=<m> grades=3
//! P <14 chars of 0/1>              # one line per pattern
//! N <grade> <days> <nights> <mixed 0|1>
//! F <pattern-index:cost> ...       # the nurse's feasible set, in order
//! D <slot> <r1> <r2> <r3>          # 14 lines, one per slot
//! ```
//!
//! Saving writes the canonical form; a loaded instance saved again is byte
//! identical. Preference costs are persisted for feasible patterns only.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::instance::{
    ContractType, Grade, Nurse, SchedulingInstance, ShiftPattern, ValidationReport, NUM_GRADES,
    NUM_SLOTS,
};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("instance violates invariants:\n{0}")]
    Invalid(ValidationReport),
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T, FixtureError> {
    Err(FixtureError::Parse {
        line,
        message: message.into(),
    })
}

/// Logical lines with their 1-based source line numbers, comments and
/// blanks removed.
fn logical_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>, FixtureError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let content = content.trim();
        if !content.is_empty() {
            out.push((idx + 1, content.to_string()));
        }
    }
    Ok(out)
}

pub fn load_instance<R: BufRead>(reader: R) -> Result<SchedulingInstance, FixtureError> {
    let lines = logical_lines(reader)?;
    let mut cursor = lines.iter();
    let eof_line = lines.last().map(|(n, _)| n + 1).unwrap_or(1);

    let mut next = |expect: &str| -> Result<(usize, &str), FixtureError> {
        match cursor.next() {
            Some((n, s)) => Ok((*n, s.as_str())),
            None => parse_err(eof_line, format!("unexpected end of file: expected {expect}")),
        }
    };

    // Header.
    let (line, header) = next("header `nurses=<n> patterns=<m> grades=3`")?;
    let mut nurses_count = None;
    let mut patterns_count = None;
    let mut grades_count = None;
    for field in header.split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            return parse_err(line, format!("expected key=value in header, got {field:?}"));
        };
        let value: usize = value
            .parse()
            .map_err(|_| FixtureError::Parse {
                line,
                message: format!("header field {key}: {value:?} is not a count"),
            })?;
        match key {
            "nurses" => nurses_count = Some(value),
            "patterns" => patterns_count = Some(value),
            "grades" => grades_count = Some(value),
            _ => return parse_err(line, format!("unknown header field {key:?}")),
        }
    }
    let (Some(n), Some(m)) = (nurses_count, patterns_count) else {
        return parse_err(line, "header must give nurses= and patterns=");
    };
    if grades_count != Some(NUM_GRADES) {
        return parse_err(line, format!("grades must be {NUM_GRADES}"));
    }

    // Pattern table.
    let mut patterns = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, text) = next("a `P <pattern>` line")?;
        let rest = match text.strip_prefix("P ").or_else(|| text.strip_prefix("P\t")) {
            Some(rest) => rest.trim(),
            None => return parse_err(line, format!("expected `P <pattern>`, got {text:?}")),
        };
        let pattern: ShiftPattern = rest
            .parse()
            .map_err(|e| FixtureError::Parse {
                line,
                message: format!("{e}"),
            })?;
        patterns.push(pattern);
    }

    // Nurses: alternating N and F lines.
    let mut nurses = Vec::with_capacity(n);
    let mut feasible_sets = Vec::with_capacity(n);
    for id in 0..n {
        let (line, text) = next("an `N <grade> <days> <nights> <mixed>` line")?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "N" {
            return parse_err(line, format!("expected `N <grade> <days> <nights> <mixed>`, got {text:?}"));
        }
        let parse_u8 = |what: &str, s: &str| -> Result<u8, FixtureError> {
            s.parse().map_err(|_| FixtureError::Parse {
                line,
                message: format!("{what}: {s:?} is not a small count"),
            })
        };
        let grade = Grade::new(parse_u8("grade", fields[1])?).map_err(|e| FixtureError::Parse {
            line,
            message: e.to_string(),
        })?;
        let days = parse_u8("contract days", fields[2])?;
        let nights = parse_u8("contract nights", fields[3])?;
        let mixed = match fields[4] {
            "0" => false,
            "1" => true,
            other => return parse_err(line, format!("mixed flag must be 0 or 1, got {other:?}")),
        };
        let contract =
            ContractType::new(days, nights, mixed).map_err(|e| FixtureError::Parse {
                line,
                message: e.to_string(),
            })?;

        let (fline, ftext) = next("an `F <index:cost> ...` line")?;
        let mut fields = ftext.split_whitespace();
        if fields.next() != Some("F") {
            return parse_err(fline, format!("expected `F <index:cost> ...`, got {ftext:?}"));
        }
        let mut feasible = Vec::new();
        let mut costs = BTreeMap::new();
        for pair in fields {
            let Some((idx, cost)) = pair.split_once(':') else {
                return parse_err(fline, format!("expected index:cost, got {pair:?}"));
            };
            let idx: usize = idx.parse().map_err(|_| FixtureError::Parse {
                line: fline,
                message: format!("pattern index {idx:?} is not a count"),
            })?;
            let cost: u32 = cost.parse().map_err(|_| FixtureError::Parse {
                line: fline,
                message: format!("cost {cost:?} is not a count"),
            })?;
            feasible.push(idx);
            costs.insert(idx, cost);
        }
        nurses.push(Nurse {
            id,
            grade,
            contract,
            preference_costs: costs,
        });
        feasible_sets.push(feasible);
    }

    // Demand block: every slot exactly once.
    let mut demand = [[0i32; NUM_GRADES]; NUM_SLOTS];
    let mut seen = [false; NUM_SLOTS];
    for _ in 0..NUM_SLOTS {
        let (line, text) = next("a `D <slot> <r1> <r2> <r3>` line")?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 2 + NUM_GRADES || fields[0] != "D" {
            return parse_err(line, format!("expected `D <slot> <r1> <r2> <r3>`, got {text:?}"));
        }
        let slot: usize = fields[1].parse().map_err(|_| FixtureError::Parse {
            line,
            message: format!("slot {:?} is not a count", fields[1]),
        })?;
        if slot >= NUM_SLOTS {
            return parse_err(line, format!("slot must be below {NUM_SLOTS}, got {slot}"));
        }
        if seen[slot] {
            return parse_err(line, format!("duplicate demand line for slot {slot}"));
        }
        seen[slot] = true;
        for (band0, s) in fields[2..].iter().enumerate() {
            demand[slot][band0] = s.parse().map_err(|_| FixtureError::Parse {
                line,
                message: format!("demand {s:?} is not an integer"),
            })?;
        }
    }

    if let Some((line, text)) = cursor.next() {
        return parse_err(*line, format!("unexpected trailing content: {text:?}"));
    }

    let instance = SchedulingInstance {
        nurses,
        patterns,
        feasible_sets,
        demand,
    };
    let report = instance.validate();
    if !report.is_pass() {
        return Err(FixtureError::Invalid(report));
    }
    Ok(instance)
}

pub fn load_instance_path(path: impl AsRef<Path>) -> Result<SchedulingInstance, FixtureError> {
    load_instance(BufReader::new(File::open(path)?))
}

pub fn save_instance<W: Write>(instance: &SchedulingInstance, mut writer: W) -> io::Result<()> {
    writeln!(
        writer,
        "nurses={} patterns={} grades={}",
        instance.num_nurses(),
        instance.num_patterns(),
        NUM_GRADES
    )?;
    for pattern in &instance.patterns {
        writeln!(writer, "P {pattern}")?;
    }
    for (nurse, feasible) in instance.nurses.iter().zip(&instance.feasible_sets) {
        writeln!(
            writer,
            "N {} {} {} {}",
            nurse.grade,
            nurse.contract.days_on(),
            nurse.contract.nights_on(),
            u8::from(nurse.contract.mixed_allowed())
        )?;
        write!(writer, "F")?;
        for &j in feasible {
            let cost = nurse.preference_costs.get(&j).copied().unwrap_or(0);
            write!(writer, " {j}:{cost}")?;
        }
        writeln!(writer)?;
    }
    for (slot, row) in instance.demand.iter().enumerate() {
        write!(writer, "D {slot}")?;
        for r in row {
            write!(writer, " {r}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn save_instance_path(
    instance: &SchedulingInstance,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    save_instance(instance, File::create(path)?)
}

pub fn instance_to_string(instance: &SchedulingInstance) -> String {
    let mut buf = Vec::new();
    save_instance(instance, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("fixture text is ASCII")
}
