use std::io::{Read, Write};
use std::path::Path;

use super::game::KernelGame;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Mc,
    Tmc,
    Loo,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
            Method::Tmc => "tmc",
            Method::Loo => "loo",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" | "freeshap" => Ok(Method::Mc),
            "tmc" => Ok(Method::Tmc),
            "loo" => Ok(Method::Loo),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One score per training point, with the provenance of the run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub method: Method,
    pub iters: usize,
    pub seed: Option<u64>,
    pub target: String,
    /// A sampling run stopped early after a numerical failure.
    pub partial: bool,
}

impl ScoreTable {
    pub fn new(game: &KernelGame, scores: Vec<f64>, method: Method, iters: usize, seed: Option<u64>) -> Self {
        ScoreTable {
            ids: game.train_ids().to_vec(),
            scores,
            method,
            iters,
            seed,
            target: game.target_name().to_string(),
            partial: false,
        }
    }

    /// Table without game context (ids `0..n`).
    pub fn from_scores(scores: Vec<f64>, method: Method) -> Self {
        ScoreTable {
            ids: (0..scores.len()).map(|i| i.to_string()).collect(),
            scores,
            method,
            iters: 0,
            seed: None,
            target: "all".into(),
            partial: false,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Indices sorted by descending score, ties by ascending index.
    pub fn order_high_first(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// Indices sorted by ascending score, ties by ascending index.
    pub fn order_low_first(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }

    /// `index,id,score,method,iters,seed,target`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["index", "id", "score", "method", "iters", "seed", "target"])
            .map_err(io)?;
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        for (i, (id, score)) in self.ids.iter().zip(&self.scores).enumerate() {
            w.write_record([
                i.to_string(),
                id.clone(),
                format!("{score:e}"),
                self.method.tag().to_string(),
                self.iters.to_string(),
                seed.clone(),
                self.target.clone(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Parses the CSV written by [`ScoreTable::write_csv`].
pub fn read_scores<R: Read>(reader: R) -> Result<ScoreTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let expected = ["index", "id", "score", "method", "iters", "seed", "target"];
    if header.iter().ne(expected) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut table: Option<ScoreTable> = None;
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let perr = |message: String| Error::Parse { line, message };
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        let index: usize = rec[0].parse().map_err(|_| perr(format!("bad index {:?}", &rec[0])))?;
        if index != row {
            return Err(perr(format!("index {index} out of order, expected {row}")));
        }
        let score: f64 = rec[2].parse().map_err(|_| perr(format!("bad score {:?}", &rec[2])))?;
        if !score.is_finite() {
            return Err(perr("score is not finite".into()));
        }
        let t = table.get_or_insert_with(|| ScoreTable {
            ids: Vec::new(),
            scores: Vec::new(),
            method: rec[3].parse().unwrap_or(Method::Mc),
            iters: rec[4].parse().unwrap_or(0),
            seed: rec[5].parse().ok(),
            target: rec[6].to_string(),
            partial: false,
        });
        t.ids.push(rec[1].to_string());
        t.scores.push(score);
    }
    table.ok_or_else(|| Error::Parse {
        line: 2,
        message: "score table has no rows".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = ScoreTable::from_scores(vec![0.25, -1e-3, 0.0], Method::Tmc);
        t.seed = Some(7);
        t.iters = 200;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,id,score,method,iters,seed,target\n0,0,2.5e-1,tmc,200,7,all\n"));
        assert_eq!(read_scores(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn orders_break_ties_by_index() {
        let t = ScoreTable::from_scores(vec![1.0, 2.0, 1.0, 0.0], Method::Loo);
        assert_eq!(t.order_high_first(), vec![1, 0, 2, 3]);
        assert_eq!(t.order_low_first(), vec![3, 0, 2, 1]);
    }
}
