use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::PersonProfile;
use crate::scene::{PoiCategory, Scene};
use crate::seeding::{rng_for, stable_hash};

/// Simulated day window, seconds since midnight.
pub const DAY_START_S: f64 = 8.0 * 3600.0;
pub const DAY_END_S: f64 = 20.0 * 3600.0;
pub const MAX_IDLE_GAP_S: f64 = 30.0 * 60.0;
pub const ENTRY_COUNT: (usize, usize) = (3, 6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Commute,
    Shop,
    Rest,
    Stroll,
    Work,
}

/// Activities that make sense at a POI of the given category.
pub fn compatible_activities(category: PoiCategory) -> &'static [Activity] {
    use Activity::*;
    use PoiCategory as C;
    match category {
        C::Store => &[Shop, Work, Stroll],
        C::Supermarket => &[Work, Commute],
        C::Restaurant | C::Cafe => &[Rest, Work],
        C::Bank | C::Office => &[Work, Commute],
        C::Hospital | C::Pharmacy => &[Work, Rest],
        C::School | C::Library | C::Museum => &[Work, Stroll],
        C::Park => &[Stroll, Rest],
        C::BusStop | C::Parking | C::GasStation => &[Commute],
        C::Hotel => &[Rest, Work],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: f64,
    pub end: f64,
    pub activity: Activity,
    pub poi_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    /// Index of the entry active at `t`; `None` during idle gaps and outside the day.
    pub fn active_entry(&self, t: f64) -> Option<usize> {
        let i = self.entries.partition_point(|e| e.start <= t);
        if i == 0 {
            return None;
        }
        (t < self.entries[i - 1].end).then_some(i - 1)
    }

    pub fn is_well_formed(&self) -> bool {
        self.entries.iter().all(|e| e.start < e.end && e.start >= DAY_START_S && e.end <= DAY_END_S)
            && self.entries.windows(2).all(|w| w[0].end <= w[1].start)
    }
}

/// Partition the day into 3–6 entries separated by idle gaps of at most 30
/// minutes. Each entry picks a POI, then an activity allowed at its category.
///
/// # Panics
/// If the scene has no POIs.
pub fn generate_schedule(profile: &PersonProfile, scene: &Scene, seed: u64) -> Schedule {
    assert!(!scene.pois.is_empty(), "schedule generation needs at least one POI");
    let mut rng = rng_for(seed, "schedule", &[stable_hash(&profile.id)]);
    let n = rng.random_range(ENTRY_COUNT.0..=ENTRY_COUNT.1);
    let gaps: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..=MAX_IDLE_GAP_S)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    let busy = (DAY_END_S - DAY_START_S) - gaps.iter().sum::<f64>();
    let wsum: f64 = weights.iter().sum();

    let mut entries = Vec::with_capacity(n);
    let mut t = DAY_START_S;
    for i in 0..n {
        let end = if i + 1 == n { DAY_END_S } else { (t + busy * weights[i] / wsum).round() };
        let poi = scene.pois.choose(&mut rng).expect("non-empty");
        let activity = *compatible_activities(poi.category).choose(&mut rng).expect("table rows are non-empty");
        entries.push(ScheduleEntry { start: t, end, activity, poi_id: poi.id.clone() });
        if i + 1 < n {
            t = (end + gaps[i]).round();
        }
    }
    Schedule { entries }
}
