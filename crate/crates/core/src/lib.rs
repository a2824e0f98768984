pub mod crowd;
pub mod geom;
pub mod inquiry;
pub mod metrics;
pub mod motion;
pub mod protocol;
pub mod recorder;
pub mod scene;
pub mod seeding;
pub mod task;
