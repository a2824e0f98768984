use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Unspecified,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Unspecified => "unspecified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub id: String,
    pub age: f64,
    pub gender: Gender,
    pub region_familiarity: f64,
    pub occupation: String,
    pub verbosity: f64,
    pub culture: String,
}

impl PersonProfile {
    /// Short free-text description handed to external instruction providers.
    pub fn summary(&self) -> String {
        format!(
            "{}-year-old {} {}, {} background, familiarity with the area {:.2}, verbosity {:.2}",
            self.age.round() as i64,
            self.gender.as_str(),
            self.occupation,
            self.culture.replace('_', " "),
            self.region_familiarity,
            self.verbosity
        )
    }

    pub fn is_valid(&self) -> bool {
        (AGE_RANGE.0..=AGE_RANGE.1).contains(&self.age)
            && (0.0..=1.0).contains(&self.region_familiarity)
            && (0.0..=1.0).contains(&self.verbosity)
            && OCCUPATIONS.contains(&self.occupation.as_str())
    }
}

pub const AGE_MEAN: f64 = 38.0;
pub const AGE_SD: f64 = 14.0;
pub const AGE_RANGE: (f64, f64) = (6.0, 95.0);

pub const OCCUPATIONS: [&str; 20] = [
    "student",
    "teacher",
    "nurse",
    "doctor",
    "engineer",
    "shop assistant",
    "cashier",
    "office clerk",
    "accountant",
    "chef",
    "waiter",
    "driver",
    "police officer",
    "artist",
    "retiree",
    "courier",
    "programmer",
    "librarian",
    "construction worker",
    "tourist",
];

pub const CULTURES: [&str; 8] = [
    "european",
    "east_asian",
    "south_asian",
    "middle_eastern",
    "african",
    "latin_american",
    "north_american",
    "oceanian",
];

pub fn generate_profile(seed: u64, index: u64) -> PersonProfile {
    let mut rng = rng_for(seed, "profile", &[index]);
    let age_dist = Normal::new(AGE_MEAN, AGE_SD).expect("valid normal");
    let beta = Beta::new(2.0, 2.0).expect("valid beta");
    let age = age_dist.sample(&mut rng).clamp(AGE_RANGE.0, AGE_RANGE.1);
    let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let region_familiarity = beta.sample(&mut rng);
    let verbosity = beta.sample(&mut rng);
    let occupation = OCCUPATIONS.choose(&mut rng).expect("non-empty").to_string();
    let culture = CULTURES.choose(&mut rng).expect("non-empty").to_string();
    PersonProfile { id: format!("ped-{index}"), age, gender, region_familiarity, occupation, verbosity, culture }
}
