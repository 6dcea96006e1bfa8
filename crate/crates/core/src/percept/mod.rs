//! Proprioceptive sensing: joint torques to servo-load features, and depth
//! classification from those features.

pub mod dataset;
pub mod knn;
pub mod load;

pub use dataset::{read_dataset, write_dataset, DatasetRow};
pub use knn::{
    depth_from_load_linear, evaluate, knn_classify, knn_train, ConfusionMatrix, DepthClass,
    DepthClassifier, LabeledFeature, LinearDepthEstimator,
};
pub use load::{
    add_sensor_noise, cycle_median, lowpass, rectify, torque_to_load, BodyJoint, LoadPipeline,
    LoadSeries, PipelineOrder,
};
