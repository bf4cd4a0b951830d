//! Curriculum schedules: token-wise hard and soft weights, ablation
//! selectors, sentence-level baselines and their composition, and the
//! curriculum-length heuristic.

mod ablation;
mod compose;
mod config;
mod dump;
mod length;
mod ngram;
mod sentence;
mod token;
mod weights;

pub use ablation::{ablation_weight_vector, Ablation};
pub use compose::compose_tc_sc;
pub use config::{CurriculumConfig, Variant};
pub use dump::{schedule_grid, write_schedule_csv, ScheduleRow};
pub use length::{estimate_curriculum_length, MetricDirection};
pub use ngram::NGramLm;
pub use sentence::{
    competence, easy_to_hard, rarity_difficulty, sc_rsqrt_schedule, sc_uncertainty_baby_steps, uncertainty_difficulty, ScMethod,
    SentenceSchedule,
};
pub use token::{hard_subseq_length, hard_weight_vector, soft_decay_factor, soft_power_factor, soft_weight_vector};
pub use weights::{WeightMode, WeightVector};
