use std::io::Read;

use super::{AgriRecord, AttrValue, AttributeKind, Domain, PipelineError, Schema};

/// A parsed dataset row that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub error: PipelineError,
}

/// A raw CSV row before schema interpretation.
pub type DatasetRow = Vec<String>;

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "?" | "NA")
}

/// Reads a wide CSV with header `user_id,domain,<attribute names...>`.
///
/// Each row is one user's submission for one domain. Cells in columns that
/// belong to the row's domain are parsed per the schema; an empty or `?`
/// cell is a missing value. Columns that the domain does not declare must be
/// empty. Bad rows are reported individually and skipped.
pub fn read_dataset<R: Read>(
    reader: R,
    schema: &Schema,
) -> Result<(Vec<AgriRecord>, Vec<RowError>), PipelineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| PipelineError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 || header[0] != "user_id" || header[1] != "domain" {
        return Err(PipelineError::Csv(
            "header must start with user_id,domain".into(),
        ));
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| PipelineError::Csv(e.to_string()))?;
        let cells: DatasetRow = row.iter().map(str::to_string).collect();
        match parse_row(&header, &cells, schema) {
            Ok(r) => records.push(r),
            Err(error) => errors.push(RowError { row: row_no, error }),
        }
    }
    Ok((records, errors))
}

fn parse_row(header: &[String], cells: &[String], schema: &Schema) -> Result<AgriRecord, PipelineError> {
    let domain: Domain = cells[1].parse()?;
    let ds = schema
        .domain(domain)
        .ok_or(PipelineError::UndeclaredDomain(domain))?;
    let mut attributes = Vec::new();
    for (name, cell) in header[2..].iter().zip(&cells[2..]) {
        let Some(spec) = ds.attributes.iter().find(|a| &a.name == name) else {
            if !is_missing(cell) {
                return Err(PipelineError::UnknownAttribute {
                    domain,
                    attribute: name.clone(),
                });
            }
            continue;
        };
        let value = if is_missing(cell) {
            AttrValue::Missing
        } else {
            match &spec.kind {
                AttributeKind::Numeric { .. } => {
                    AttrValue::Numeric(cell.parse().map_err(|_| PipelineError::TypeMismatch {
                        attribute: name.clone(),
                    })?)
                }
                AttributeKind::Categorical { .. } => AttrValue::Token(cell.clone()),
            }
        };
        attributes.push((name.clone(), value));
    }
    Ok(AgriRecord {
        user_id: cells[0].clone(),
        domain,
        attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_and_reports_bad_ones() {
        let text = "user_id,domain,Humidity,Rainfall,Type\n\
                    u1,weather,40,?,\n\
                    u2,orchard,1,2,\n\
                    u3,weather,abc,3,\n";
        let (records, errors) = read_dataset(text.as_bytes(), &Schema::standard()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].value("Humidity"), Some(&AttrValue::Numeric(40.0)));
        assert_eq!(records[0].value("Rainfall"), Some(&AttrValue::Missing));
        assert_eq!(errors.iter().map(|e| e.row).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn bad_header_is_fatal() {
        assert!(read_dataset("a,b\n".as_bytes(), &Schema::standard()).is_err());
    }
}
