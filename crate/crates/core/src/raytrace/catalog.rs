use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{sort_paths, BandConfig, InteractionKind, PropagationPath, Tracer};
use crate::geom::{OrientedBox, Vec3};

/// Every candidate path of one link through the static geometry.
///
/// Moving obstacles never create paths, they only remove them, so the paths
/// present at time `t` are the catalog entries whose legs avoid the mover
/// boxes at `t`. Diffraction entries are kept regardless of line-of-sight and
/// only surface when the direct ray is blocked.
#[derive(Debug, Clone)]
pub struct LinkCatalog {
    tx: Vec3,
    rx: Vec3,
    entries: Vec<PropagationPath>,
    los_clear_static: bool,
}

impl LinkCatalog {
    pub fn build(tracer: &Tracer, tx: Vec3, rx: Vec3, band: &BandConfig, tx_power_dbm: f64) -> Self {
        let mut raw = Vec::new();
        let mut los_clear_static = false;
        if let Some(p) = tracer.direct_with(tx, rx, &[]) {
            los_clear_static = p.interactions.is_empty();
            raw.push(p);
        }
        tracer.reflections_with(tx, rx, &[], 2, &mut raw);
        tracer.diffractions_with(tx, rx, &[], &mut raw);

        raw.retain_mut(|p| match tracer.path_power(p, tx_power_dbm, band) {
            Ok(pw) if pw >= band.rx_sensitivity_dbm => {
                p.rx_power_dbm = pw;
                true
            }
            _ => false,
        });
        sort_paths(&mut raw);
        let mut seen = BTreeSet::new();
        raw.retain(|p| seen.insert(p.signature()));
        Self { tx, rx, entries: raw, los_clear_static }
    }

    pub fn tx(&self) -> Vec3 {
        self.tx
    }

    pub fn rx(&self) -> Vec3 {
        self.rx
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Paths with no moving obstacles present.
    pub fn static_paths(&self) -> Vec<PropagationPath> {
        self.at(&[])
    }

    /// Surviving paths, in arrival order, given the mover boxes at some instant.
    pub fn at(&self, boxes: &[OrientedBox]) -> Vec<PropagationPath> {
        let blocked = |a: Vec3, b: Vec3| boxes.iter().any(|bx| bx.hits_segment(a, b));
        let los_clear = self.los_clear_static && !blocked(self.tx, self.rx);
        self.entries
            .iter()
            .filter(|p| !(los_clear && p.count_of(InteractionKind::Diffraction) > 0))
            .filter(|p| !p.legs().any(|(a, b)| blocked(a, b)))
            .cloned()
            .collect()
    }

    /// The earliest surviving path without building the whole list.
    pub fn first_at(&self, boxes: &[OrientedBox]) -> Vec<PropagationPath> {
        let blocked = |a: Vec3, b: Vec3| boxes.iter().any(|bx| bx.hits_segment(a, b));
        let los_clear = self.los_clear_static && !blocked(self.tx, self.rx);
        let mut out: Vec<PropagationPath> = Vec::new();
        for p in &self.entries {
            if let Some(first) = out.first() {
                if p.toa - first.toa >= super::TOA_TIE_S {
                    break;
                }
            }
            if los_clear && p.count_of(InteractionKind::Diffraction) > 0 {
                continue;
            }
            if p.legs().any(|(a, b)| blocked(a, b)) {
                continue;
            }
            out.push(p.clone());
        }
        out
    }
}
