use std::io::Write;

use super::{DeliveryOutcome, Nanos, PacketKind};
use crate::topo::NodeId;

/// One transmission attempt as seen by the link model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub time_ns: Nanos,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: PacketKind,
    pub size: u32,
    pub outcome: DeliveryOutcome,
}

impl TraceRow {
    pub fn outcome_str(&self) -> String {
        match self.outcome {
            DeliveryOutcome::Delivered { at } => format!("delivered@{at}"),
            DeliveryOutcome::Lost => "lost".into(),
            DeliveryOutcome::Dropped(_) => "dropped_link_down".into(),
        }
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(w, "time_ns,src,dst,kind,size,outcome")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.time_ns, r.src, r.dst, r.kind.as_str(), r.size, r.outcome_str())?;
    }
    Ok(())
}
