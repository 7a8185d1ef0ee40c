use std::io::{Read, Write};

use crate::data::{Trait, TraitMatrix};
use crate::error::{Error, Result};

/// First cell of the optional second header row holding meaning-class tags.
pub const CLASS_ROW_MARKER: &str = "#class";

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub matrix: TraitMatrix,
    /// Number of `?` cells, read as absent.
    pub missing: usize,
}

/// Reads a taxa-by-traits CSV: a header row of trait ids (its first cell
/// names the taxon column), an optional class row starting with
/// [`CLASS_ROW_MARKER`], then one row per taxon with cells `0`, `1` or `?`.
pub fn read_trait_matrix<R: Read>(input: R) -> Result<MatrixFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::parse(1, "empty matrix file")),
    };
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut traits: Vec<Trait> = ids
        .iter()
        .map(|id| Trait {
            id: id.clone(),
            leaves: Vec::new(),
            class: None,
        })
        .collect();
    let mut taxa = Vec::new();
    let mut missing = 0;
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != ids.len() + 1 {
            return Err(Error::parse(
                line,
                format!("expected {} cells, found {}", ids.len() + 1, rec.len()),
            ));
        }
        if &rec[0] == CLASS_ROW_MARKER {
            if !taxa.is_empty() {
                return Err(Error::parse(
                    line,
                    "class row must directly follow the header",
                ));
            }
            for (t, tag) in traits.iter_mut().zip(rec.iter().skip(1)) {
                t.class = (!tag.is_empty()).then(|| tag.to_string());
            }
            continue;
        }
        let row = taxa.len();
        if rec[0].is_empty() {
            return Err(Error::parse(line, "empty taxon name"));
        }
        if taxa.iter().any(|t| t == &rec[0]) {
            return Err(Error::parse(line, format!("duplicate taxon '{}'", &rec[0])));
        }
        taxa.push(rec[0].to_string());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            match cell {
                "1" => traits[j].leaves.push(row),
                "0" => {}
                "?" => missing += 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        col: Some(j + 2),
                        msg: format!("cell '{other}' is not 0, 1 or ?"),
                    })
                }
            }
        }
    }
    Ok(MatrixFile {
        matrix: TraitMatrix::new(taxa, traits)?,
        missing,
    })
}

pub fn write_trait_matrix<W: Write>(m: &TraitMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["taxon"];
    header.extend(m.traits().iter().map(|t| t.id.as_str()));
    w.write_record(&header)?;
    if m.traits().iter().any(|t| t.class.is_some()) {
        let mut row = vec![CLASS_ROW_MARKER];
        row.extend(m.traits().iter().map(|t| t.class.as_deref().unwrap_or("")));
        w.write_record(&row)?;
    }
    for (taxon, cells) in m.taxa().iter().zip(m.to_rows()) {
        let mut row = vec![taxon.as_str()];
        row.extend(cells.iter().map(|&b| if b { "1" } else { "0" }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
