//! Monthly cache CSV: `station_id,latitude,longitude,year,month,rainfall_mm,flag`.
//!
//! Reals are written in their shortest round-trip decimal form, so reading a
//! written cache reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::calendar::YearMonth;
use super::series::{MonthFlag, MonthlySeries};
use crate::error::{Error, Result};

pub const CACHE_HEADER: [&str; 7] = [
    "station_id",
    "latitude",
    "longitude",
    "year",
    "month",
    "rainfall_mm",
    "flag",
];

pub fn write_monthly_cache(w: impl Write, series: &[MonthlySeries]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CACHE_HEADER)?;
    for s in series {
        for (ym, v, flag) in s.iter() {
            wtr.write_record([
                s.station_id.as_str(),
                &s.latitude.to_string(),
                &s.longitude.to_string(),
                &ym.year.to_string(),
                &ym.month.to_string(),
                &v.to_string(),
                flag.as_str(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<monthly cache>", e))?;
    Ok(())
}

pub fn save_monthly_cache(path: impl AsRef<Path>, series: &[MonthlySeries]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_monthly_cache(file, series)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} `{field}`")))
}

pub fn read_monthly_cache(r: impl Read) -> Result<Vec<MonthlySeries>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(CACHE_HEADER) {
        return Err(Error::Parse(format!(
            "monthly cache header must be `{}`",
            CACHE_HEADER.join(",")
        )));
    }
    let mut out: Vec<MonthlySeries> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row[0].trim();
        let lat: f64 = parse(&row[1], "latitude", line)?;
        let lon: f64 = parse(&row[2], "longitude", line)?;
        let ym = YearMonth::new(parse(&row[3], "year", line)?, parse(&row[4], "month", line)?)?;
        let value: f64 = parse(&row[5], "rainfall_mm", line)?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Parse(format!("line {line}: rainfall must be finite and >= 0")));
        }
        let flag = match row[6].trim() {
            "observed" => MonthFlag::Observed,
            "imputed" => MonthFlag::Imputed,
            other => return Err(Error::Parse(format!("line {line}: bad flag `{other}`"))),
        };
        match out.last_mut() {
            Some(s) if s.station_id == id => {
                if s.latitude.to_bits() != lat.to_bits() || s.longitude.to_bits() != lon.to_bits() {
                    return Err(Error::Parse(format!(
                        "line {line}: coordinates change within station {id}"
                    )));
                }
                let expected = s.start.plus(s.len() as i64);
                if ym != expected {
                    return Err(Error::Parse(format!(
                        "line {line}: station {id} jumps from {} to {ym}",
                        s.month_at(s.len() - 1)
                    )));
                }
                s.values.push(value);
                s.flags.push(flag);
            }
            _ => {
                if out.iter().any(|s| s.station_id == id) {
                    return Err(Error::Parse(format!(
                        "line {line}: station {id} rows are not contiguous"
                    )));
                }
                let mut s = MonthlySeries::observed(id, lat, lon, ym, vec![value]);
                s.flags[0] = flag;
                out.push(s);
            }
        }
    }
    Ok(out)
}

pub fn load_monthly_cache(path: impl AsRef<Path>) -> Result<Vec<MonthlySeries>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_monthly_cache(file)
}
