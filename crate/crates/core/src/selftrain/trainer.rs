//! Student training hooks.
//!
//! A hook receives a training file and an output directory and returns the
//! backend that serves the trained model. External hooks may write
//! `backend.json` (a [`BackendDescriptor`]) into the output directory to
//! announce where the new model is served; otherwise the configured student
//! descriptor is used.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backends::{BackendDescriptor, NoiseProfile};
use crate::error::{Error, Result};
use crate::jsonl;

pub const BACKEND_FILE: &str = "backend.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainTask {
    Values,
    Estimator,
    Slot,
}

impl fmt::Display for TrainTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainTask::Values => "values",
            TrainTask::Estimator => "estimator",
            TrainTask::Slot => "slot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainJob {
    pub task: TrainTask,
    pub train_file: PathBuf,
    pub out_dir: PathBuf,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub checkpoint: PathBuf,
    pub backend: BackendDescriptor,
}

pub trait Trainer: Send + Sync {
    fn train(&self, job: &TrainJob) -> Result<TrainedModel>;
}

fn announced_backend(out_dir: &Path, fallback: &BackendDescriptor) -> Result<BackendDescriptor> {
    let path = out_dir.join(BACKEND_FILE);
    if path.exists() {
        let d: BackendDescriptor = jsonl::read_json(&path)?;
        d.validate()?;
        Ok(d)
    } else {
        Ok(fallback.clone())
    }
}

/// Runs `program [args..] --task T --train-file F --out-dir D`.
#[derive(Debug, Clone)]
pub struct CommandTrainer {
    pub program: String,
    pub args: Vec<String>,
    pub student: BackendDescriptor,
}

impl Trainer for CommandTrainer {
    fn train(&self, job: &TrainJob) -> Result<TrainedModel> {
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg("--task")
            .arg(job.task.to_string())
            .arg("--train-file")
            .arg(&job.train_file)
            .arg("--out-dir")
            .arg(&job.out_dir)
            .output()
            .map_err(|e| Error::Trainer(format!("cannot run {}: {e}", self.program)))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let tail: String = stderr
                .lines()
                .last()
                .unwrap_or("")
                .chars()
                .take(400)
                .collect();
            return Err(Error::Trainer(format!(
                "{} exited with {}: {tail}",
                self.program, output.status
            )));
        }
        Ok(TrainedModel {
            checkpoint: job.out_dir.clone(),
            backend: announced_backend(&job.out_dir, &self.student)?,
        })
    }
}

#[derive(Deserialize, Default)]
struct TrainResponse {
    #[serde(default)]
    backend: Option<BackendDescriptor>,
}

/// Posts the job to `{endpoint}/v1/train`.
#[derive(Debug)]
pub struct HttpTrainer {
    endpoint: String,
    student: BackendDescriptor,
    agent: ureq::Agent,
}

impl HttpTrainer {
    pub fn new(endpoint: &str, student: BackendDescriptor, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            student,
            agent,
        }
    }
}

impl Trainer for HttpTrainer {
    fn train(&self, job: &TrainJob) -> Result<TrainedModel> {
        let url = format!("{}/v1/train", self.endpoint);
        let mut response = self
            .agent
            .post(&url)
            .send_json(job)
            .map_err(|e| Error::Trainer(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::Trainer(format!("{url} answered HTTP {status}")));
        }
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Trainer(format!("{url}: {e}")))?;
        let parsed: TrainResponse = if body.trim().is_empty() {
            TrainResponse::default()
        } else {
            serde_json::from_str(&body)
                .map_err(|e| Error::Trainer(format!("{url}: malformed response: {e}")))?
        };
        let backend = match parsed.backend {
            Some(d) => {
                d.validate()?;
                d
            }
            None => announced_backend(&job.out_dir, &self.student)?,
        };
        Ok(TrainedModel {
            checkpoint: job.out_dir.clone(),
            backend,
        })
    }
}

/// Simulated training: the student of iteration `i` is a noisy backend with
/// the `i`-th configured profile (the last one repeats). Every job is
/// recorded and the training file is checked to be readable.
#[derive(Debug)]
pub struct ScheduledTrainer {
    profiles: Vec<NoiseProfile>,
    estimator: BackendDescriptor,
    jobs: Mutex<Vec<TrainJob>>,
}

impl ScheduledTrainer {
    pub fn new(profiles: Vec<NoiseProfile>, estimator: BackendDescriptor) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::argument(
                "scheduled trainer needs at least one profile",
            ));
        }
        for p in &profiles {
            p.validate()?;
        }
        Ok(Self {
            profiles,
            estimator,
            jobs: Mutex::new(Vec::new()),
        })
    }

    pub fn jobs(&self) -> Vec<TrainJob> {
        self.jobs.lock().expect("job log poisoned").clone()
    }
}

impl Trainer for ScheduledTrainer {
    fn train(&self, job: &TrainJob) -> Result<TrainedModel> {
        let lines: Vec<serde_json::Value> = jsonl::read(&job.train_file)?;
        if lines.is_empty() {
            return Err(Error::Trainer(format!(
                "empty training file {}",
                job.train_file.display()
            )));
        }
        self.jobs
            .lock()
            .expect("job log poisoned")
            .push(job.clone());
        let backend = match job.task {
            TrainTask::Values => {
                let i = (job.iteration.max(1) as usize - 1).min(self.profiles.len() - 1);
                BackendDescriptor::noisy(self.profiles[i].clone())
            }
            TrainTask::Estimator => self.estimator.clone(),
            TrainTask::Slot => BackendDescriptor::oracle(),
        };
        Ok(TrainedModel {
            checkpoint: job.out_dir.clone(),
            backend,
        })
    }
}

fn default_train_timeout_ms() -> u64 {
    24 * 60 * 60 * 1000
}

/// Configuration form of a trainer hook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrainerHook {
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        student: BackendDescriptor,
    },
    Http {
        endpoint: String,
        student: BackendDescriptor,
        #[serde(default = "default_train_timeout_ms")]
        timeout_ms: u64,
    },
    Scheduled {
        profiles: Vec<NoiseProfile>,
        #[serde(default = "BackendDescriptor::oracle")]
        estimator: BackendDescriptor,
    },
}

impl TrainerHook {
    pub fn build(&self) -> Result<Box<dyn Trainer>> {
        Ok(match self {
            TrainerHook::Command {
                program,
                args,
                student,
            } => {
                student.validate()?;
                Box::new(CommandTrainer {
                    program: program.clone(),
                    args: args.clone(),
                    student: student.clone(),
                })
            }
            TrainerHook::Http {
                endpoint,
                student,
                timeout_ms,
            } => {
                student.validate()?;
                Box::new(HttpTrainer::new(
                    endpoint,
                    student.clone(),
                    Duration::from_millis(*timeout_ms),
                ))
            }
            TrainerHook::Scheduled {
                profiles,
                estimator,
            } => Box::new(ScheduledTrainer::new(profiles.clone(), estimator.clone())?),
        })
    }
}
