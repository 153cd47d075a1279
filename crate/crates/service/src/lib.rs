//! HTTP API and command-line front end for the storybook QA pipeline.

pub mod api;
pub mod cli;
