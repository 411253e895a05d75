//! Training tasks: the adding problem and arena navigation.

pub mod adding;
pub mod navigation;

pub use adding::{gen_adding_batch, rmse, AddingSample, AddingTensors};
pub use navigation::{
    decode_position, gen_trajectories, nav_loss, place_scores, NavArena, NavTensors, NavTrajectory, PlaceScoreForm,
    PositionDecoder,
};
