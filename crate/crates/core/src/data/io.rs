//! CSV readers and writers for panel and attribute files.
//!
//! Brands are numbered from 1 in files and from 0 in memory.

use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Writer};

use super::{BrandAttributeMatrix, PanelDataset, RawOccasion, N_FEATURES};
use crate::error::{Error, Result};

const ATTRIBUTE_HEADER: [&str; 6] = [
    "brand",
    "saa",
    "bleach",
    "package",
    "g_per_30l",
    "net_weight",
];

fn column(headers: &StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Malformed(format!("missing column '{name}'")))
}

fn parse<T: std::str::FromStr>(rec: &StringRecord, idx: usize, what: &str, line: u64) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse()
        .map_err(|_| Error::Malformed(format!("line {line}: cannot parse {what} from '{raw}'")))
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<PanelDataset> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let hid = column(&headers, "household_id")?;
    let occ = column(&headers, "occasion")?;
    let chosen = column(&headers, "chosen_brand")?;

    let n_price = headers
        .iter()
        .filter(|h| h.trim().starts_with("price_"))
        .count();
    let n_display = headers
        .iter()
        .filter(|h| h.trim().starts_with("display_"))
        .count();
    let n_brands = n_price.max(n_display);
    if n_brands == 0 {
        return Err(Error::Malformed("no price_/display_ columns".into()));
    }
    let price_cols = (1..=n_brands)
        .map(|k| column(&headers, &format!("price_{k}")))
        .collect::<Result<Vec<_>>>()?;
    let display_cols = (1..=n_brands)
        .map(|k| column(&headers, &format!("display_{k}")))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let chosen_brand: usize = parse(&rec, chosen, "chosen_brand", line)?;
        if chosen_brand == 0 {
            return Err(Error::Malformed(format!(
                "line {line}: chosen_brand is 1-based"
            )));
        }
        records.push(RawOccasion {
            household_id: rec.get(hid).unwrap_or("").trim().to_string(),
            occasion: parse(&rec, occ, "occasion", line)?,
            chosen: chosen_brand - 1,
            prices: price_cols
                .iter()
                .map(|&c| parse(&rec, c, "price", line))
                .collect::<Result<_>>()?,
            displays: display_cols
                .iter()
                .map(|&c| parse(&rec, c, "display", line))
                .collect::<Result<_>>()?,
        });
    }
    Ok(PanelDataset::from_records(records, n_brands))
}

pub fn write_panel_csv<W: Write>(dataset: &PanelDataset, writer: W) -> Result<()> {
    let j = dataset.n_brands();
    let mut w = Writer::from_writer(writer);
    let mut header = vec![
        "household_id".to_string(),
        "occasion".into(),
        "chosen_brand".into(),
    ];
    header.extend((1..=j).map(|k| format!("price_{k}")));
    header.extend((1..=j).map(|k| format!("display_{k}")));
    w.write_record(&header)?;
    for hh in dataset.households() {
        for o in &hh.occasions {
            let mut row = vec![
                hh.id.clone(),
                o.occasion_index.to_string(),
                (o.chosen + 1).to_string(),
            ];
            row.extend(o.list_prices.iter().map(|p| p.to_string()));
            row.extend(o.displays.iter().map(|d| d.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_attributes_csv<R: Read>(reader: R) -> Result<BrandAttributeMatrix> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = ATTRIBUTE_HEADER
        .iter()
        .map(|name| column(&headers, name))
        .collect::<Result<Vec<_>>>()?;
    let mut brands = Vec::new();
    let mut features = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        brands.push(rec.get(cols[0]).unwrap_or("").trim().to_string());
        let mut f = [0.0; N_FEATURES];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = parse(&rec, cols[k + 1], ATTRIBUTE_HEADER[k + 1], line)?;
        }
        features.push(f);
    }
    if brands.is_empty() {
        return Err(Error::Malformed("attribute file has no rows".into()));
    }
    Ok(BrandAttributeMatrix::from_features(brands, &features))
}

pub fn write_attributes_csv<W: Write>(attrs: &BrandAttributeMatrix, writer: W) -> Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record(ATTRIBUTE_HEADER)?;
    for (name, row) in attrs.brands().iter().zip(attrs.rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row[1..].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the dense-index to household-id mapping.
pub fn write_household_map<W: Write>(dataset: &PanelDataset, writer: W) -> Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record(["index", "household_id"])?;
    for (h, id) in dataset.household_ids().into_iter().enumerate() {
        w.write_record([h.to_string().as_str(), id])?;
    }
    w.flush()?;
    Ok(())
}
