//! The nets shipped under `fixtures/`, parsed on demand. Tests and
//! benchmarks use these so the PNML front end stays the single source
//! of truth for the models.

use crate::dpn::Dpn;
use crate::pnml::parse_pnml;

macro_rules! fixture {
    ($name:ident, $file:literal) => {
        pub fn $name() -> Dpn {
            parse_pnml(include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../fixtures/",
                $file
            )))
            .expect(concat!("fixture ", $file, " parses"))
        }
    };
}

fixture!(auction, "auction.pnml");
fixture!(auction_reset, "auction_reset.pnml");
fixture!(auction_thresh, "auction_thresh.pnml");
fixture!(road_fines, "road_fines.pnml");
fixture!(sound_trivial, "sound_trivial.pnml");
fixture!(sound_gate, "sound_gate.pnml");

/// Every shipped valid net.
pub fn all() -> Vec<Dpn> {
    vec![
        auction(),
        auction_reset(),
        auction_thresh(),
        road_fines(),
        sound_trivial(),
        sound_gate(),
    ]
}
