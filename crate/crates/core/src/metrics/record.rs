use std::io::Write;

use crate::node::NodeId;

/// One node's cumulative metrics at a sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub time: f64,
    pub node: NodeId,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub f1: f64,
    pub prototypes_trained: u64,
    pub bytes_sent: u64,
    pub model_size: usize,
    /// Time-averaged staleness of this node's copies of every peer model.
    pub mean_staleness: f64,
}

pub const RECORD_HEADER: [&str; 12] = [
    "time",
    "node",
    "tp",
    "fp",
    "fn",
    "f1",
    "prototypes_trained",
    "bytes_sent",
    "model_size",
    "mean_staleness",
    "seed",
    "scenario",
];

pub fn write_records<W: Write>(
    out: W,
    records: &[MetricsRecord],
    seed: u64,
    scenario: &str,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.time.to_string(),
            r.node.to_string(),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            r.f1.to_string(),
            r.prototypes_trained.to_string(),
            r.bytes_sent.to_string(),
            r.model_size.to_string(),
            r.mean_staleness.to_string(),
            seed.to_string(),
            scenario.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rec = MetricsRecord {
            time: 1.5,
            node: 2,
            tp: 3,
            fp: 1,
            fn_: 2,
            f1: 0.5,
            prototypes_trained: 10,
            bytes_sent: 400,
            model_size: 7,
            mean_staleness: 0.25,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &[rec], 9, "jsd").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,node,tp,fp,fn,f1,prototypes_trained,bytes_sent,model_size,mean_staleness,seed,scenario"
        );
        assert_eq!(lines.next().unwrap(), "1.5,2,3,1,2,0.5,10,400,7,0.25,9,jsd");
    }
}
