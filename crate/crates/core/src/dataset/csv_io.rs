use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{validate_schema, CodeMaps, ColumnKind, ColumnRole, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Days since 1970-01-01.
pub fn date_to_ordinal(date: NaiveDate) -> i64 {
    (date - epoch()).num_days()
}

pub fn ordinal_to_date(ordinal: i64) -> NaiveDate {
    epoch() + chrono::Duration::days(ordinal)
}

/// Loads a CSV file against `schema`. Categorical columns are coded by order
/// of first appearance.
pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSchema]) -> Result<Dataset> {
    load_csv_with_codes(path, schema, None)
}

/// As [`load_csv`], but seeds the category codes from `known` so that labels
/// seen at training time keep their codes. New labels extend the map.
pub fn load_csv_with_codes(
    path: impl AsRef<Path>,
    schema: &[ColumnSchema],
    known: Option<&CodeMaps>,
) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema, known)
}

pub(crate) fn read_csv<R: std::io::Read>(
    reader: R,
    schema: &[ColumnSchema],
    known: Option<&CodeMaps>,
) -> Result<Dataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut position = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        position.insert(h.as_str(), i);
    }
    for h in &header {
        if !schema.iter().any(|c| &c.name == h) {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    let mut col_of = Vec::with_capacity(schema.len());
    for c in schema {
        let p = *position
            .get(c.name.as_str())
            .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
        col_of.push(p);
    }

    let features: Vec<(usize, &ColumnSchema)> = schema
        .iter()
        .enumerate()
        .filter(|(_, c)| c.role == ColumnRole::Feature)
        .collect();
    let target_pos = schema
        .iter()
        .position(|c| c.role == ColumnRole::Target)
        .expect("validated");
    let time_pos = schema.iter().position(|c| c.role == ColumnRole::TimeIndex);

    let mut code_maps: CodeMaps = CodeMaps::new();
    let mut lookup: HashMap<String, HashMap<String, usize>> = HashMap::new();
    for (_, c) in &features {
        if c.kind == ColumnKind::Categorical {
            let labels = known
                .and_then(|k| k.get(&c.name))
                .cloned()
                .unwrap_or_default();
            let map = labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.clone(), i))
                .collect();
            lookup.insert(c.name.clone(), map);
            code_maps.insert(c.name.clone(), labels);
        }
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut times = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = r + 1;
        let cell = |schema_idx: usize| -> Result<&str> {
            let c = &schema[schema_idx];
            let v = rec.get(col_of[schema_idx]).map(str::trim).unwrap_or("");
            if v.is_empty() || v.eq_ignore_ascii_case("nan") || v.eq_ignore_ascii_case("na") {
                return Err(Error::MissingValue {
                    row: row_no,
                    column: c.name.clone(),
                });
            }
            Ok(v)
        };
        let parse_num = |schema_idx: usize| -> Result<f64> {
            let v = cell(schema_idx)?;
            v.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: row_no,
                    column: schema[schema_idx].name.clone(),
                    value: v.to_string(),
                })
        };

        for &(si, c) in &features {
            let value = match c.kind {
                ColumnKind::Numeric => parse_num(si)?,
                ColumnKind::Binary => {
                    let v = parse_num(si)?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Parse {
                            row: row_no,
                            column: c.name.clone(),
                            value: cell(si)?.to_string(),
                        });
                    }
                    v
                }
                ColumnKind::Categorical => {
                    let label = cell(si)?;
                    let map = lookup.get_mut(&c.name).expect("initialized");
                    let next = map.len();
                    let code = *map.entry(label.to_string()).or_insert_with(|| {
                        code_maps
                            .get_mut(&c.name)
                            .expect("initialized")
                            .push(label.to_string());
                        next
                    });
                    code as f64
                }
            };
            x.push(value);
        }
        y.push(parse_num(target_pos)?);
        if let Some(tp) = time_pos {
            let v = cell(tp)?;
            let date = NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| Error::Parse {
                row: row_no,
                column: schema[tp].name.clone(),
                value: v.to_string(),
            })?;
            let ord = date_to_ordinal(date);
            if let Some(&prev) = times.last() {
                if ord <= prev {
                    return Err(Error::NonMonotoneTime { row: row_no });
                }
            }
            times.push(ord);
        }
    }

    let n = y.len();
    let feature_schema: Vec<ColumnSchema> = features.iter().map(|(_, c)| (*c).clone()).collect();
    let matrix = Matrix::new(n, feature_schema.len(), x)?;
    let ds = Dataset::new(
        feature_schema,
        matrix,
        y,
        time_pos.map(|_| times),
        schema[target_pos].name.clone(),
    )?
    .with_time_name(time_pos.map(|p| schema[p].name.clone()))
    .with_code_maps(code_maps);
    Ok(ds)
}

/// Writes the dataset as CSV: time index (ISO date) first if present, then
/// features (categoricals as their labels), then the target.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_to(d, file)
}

pub(crate) fn write_csv_to<W: std::io::Write>(d: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = Vec::new();
    if let Some(t) = d.time_name() {
        header.push(t);
    }
    header.extend(d.features().iter().map(|f| f.name.as_str()));
    header.push(d.target_name());
    wtr.write_record(&header)?;

    let labels: Vec<Option<&Vec<String>>> = d
        .features()
        .iter()
        .map(|f| {
            if f.kind == ColumnKind::Categorical {
                d.code_maps().get(&f.name)
            } else {
                None
            }
        })
        .collect();
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..d.n_rows() {
        record.clear();
        if d.time_name().is_some() {
            record.push(ordinal_to_date(d.time_index()[i]).format("%Y-%m-%d").to_string());
        }
        for (j, v) in d.x().row(i).iter().enumerate() {
            match labels[j] {
                Some(map) => {
                    let code = *v as usize;
                    record.push(map.get(code).cloned().unwrap_or_else(|| code.to_string()));
                }
                None => record.push(v.to_string()),
            }
        }
        record.push(d.y()[i].to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::new("date", ColumnKind::Numeric, ColumnRole::TimeIndex),
            ColumnSchema::feature("x", ColumnKind::Numeric),
            ColumnSchema::new("y", ColumnKind::Numeric, ColumnRole::Target),
        ]
    }

    #[test]
    fn parses_three_rows() {
        let text = "date,x,y\n2020-01-01,1.5,10\n2020-01-02,2,20\n2020-01-03,3,30\n";
        let d = read_csv(text.as_bytes(), &schema(), None).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_features(), 1);
        assert_eq!(d.y(), &[10.0, 20.0, 30.0]);
        assert_eq!(d.time_index()[1] - d.time_index()[0], 1);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let text = "date,x,y\n2020-01-01,1,10\n2020-01-02,abc,20\n";
        match read_csv(text.as_bytes(), &schema(), None) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "x", "abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_value_and_missing_column_fail_closed() {
        let text = "date,x,y\n2020-01-01,,10\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema(), None),
            Err(Error::MissingValue { row: 1, .. })
        ));
        let text = "date,y\n2020-01-01,10\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema(), None),
            Err(Error::MissingColumn(c)) if c == "x"
        ));
        let text = "date,x,y,z\n2020-01-01,1,10,3\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema(), None),
            Err(Error::UnknownColumn(c)) if c == "z"
        ));
    }

    #[test]
    fn non_monotone_dates_rejected() {
        let text = "date,x,y\n2020-01-02,1,10\n2020-01-01,1,10\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema(), None),
            Err(Error::NonMonotoneTime { row: 2 })
        ));
    }

    #[test]
    fn categoricals_coded_by_first_appearance() {
        let s = vec![
            ColumnSchema::feature("c", ColumnKind::Categorical),
            ColumnSchema::new("y", ColumnKind::Numeric, ColumnRole::Target),
        ];
        let d = read_csv("c,y\nA,1\nB,2\nA,3\n".as_bytes(), &s, None).unwrap();
        assert_eq!(d.x().column(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(d.code_maps()["c"], vec!["A", "B"]);

        // known codes are kept, new labels appended
        let mut known = CodeMaps::new();
        known.insert("c".into(), vec!["B".into(), "A".into()]);
        let d = read_csv("c,y\nA,1\nC,2\n".as_bytes(), &s, Some(&known)).unwrap();
        assert_eq!(d.x().column(0), vec![1.0, 2.0]);
        assert_eq!(d.code_maps()["c"], vec!["B", "A", "C"]);
    }

    #[test]
    fn write_then_read_is_lossless() {
        let s = vec![
            ColumnSchema::new("date", ColumnKind::Numeric, ColumnRole::TimeIndex),
            ColumnSchema::feature("x", ColumnKind::Numeric),
            ColumnSchema::feature("c", ColumnKind::Categorical),
            ColumnSchema::new("y", ColumnKind::Numeric, ColumnRole::Target),
        ];
        let text = "date,x,c,y\n2021-03-01,0.1,K,1e-3\n2021-03-05,0.30000000000000004,L,2\n";
        let d = read_csv(text.as_bytes(), &s, None).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &s, None).unwrap();
        assert_eq!(back, d);
    }
}
