//! Linear models used by the benchmarks: OLS regression, multinomial
//! logistic regression and a one-vs-rest linear SVM.

mod classifier;
mod ols;

pub use classifier::{
    accuracy, fit_classifier, fit_linear_svm, fit_logistic, logistic_objective, svm_objective,
    ClassifierConfig, ClassifierFit, ClassifierKind,
};
pub use ols::{fit_least_squares, fit_ols, mse, sse, LinearRegressionFit, RANK_TOLERANCE};
