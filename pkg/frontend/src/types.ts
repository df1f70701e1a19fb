/** Shared types mirroring the session service API (docs/api.md, v1). */

export type Choice = "left" | "right";

export type SessionMode = "image-target" | "concept-target";

export interface SessionStatus {
  session_id: string;
  mode: SessionMode;
  label: string;
  status: "active" | "awaiting-advance" | "terminated";
  generation: number;
  answered: number;
  scheduled: number;
  total_answered: number;
  population: number;
  views: number;
  min_trials_to_terminate: number;
}

export interface TrialImage {
  image_id: string;
  png_base64: string;
}

export type TrialTarget =
  | { kind: "image"; url: string }
  | { kind: "label"; text: string };

export interface TrialPayload {
  token: string;
  generation: number;
  pair_index: number;
  progress: { answered: number; scheduled: number };
  left: TrialImage;
  right: TrialImage;
  target: TrialTarget;
}

export interface ChoiceAck {
  answered: number;
  scheduled: number;
  generation_complete: boolean;
  total_answered: number;
}

export interface AdvanceSummary {
  generation: number;
  migration_rate: number;
  provenance: Record<string, number>;
}

export interface TerminateSummary {
  status: "terminated";
  generation: number;
  best_id: string;
  best_slot: number;
  best_wins: number;
  total_answered: number;
}

export interface Reconstruction {
  generation: number;
  best_id: string;
  best_slot: number;
  best_wins: number;
  best_png_base64: string;
  mean_png_base64: string;
}

export interface ApiError {
  category: string;
  message: string;
}

export interface CreateSessionOptions {
  mode: SessionMode;
  label?: string;
  target_png_base64?: string;
  seed?: number;
  session_id?: string;
  min_trials_to_terminate?: number;
  config?: Record<string, unknown>;
}

/** One rapid-detection trial in the server's detection-log schema. */
export interface DetectionTrialRecord {
  image_id: string;
  is_intact: boolean;
  similarity_group: "most" | "least" | "threshold";
  duration_ms: number;
  response: "intact" | "scrambled";
  rt_ms: number;
}

/** Stimulus entry of a detection manifest. */
export interface DetectionStimulus {
  image_id: string;
  png_base64: string;
  is_intact: boolean;
  similarity_group: "most" | "least" | "threshold";
}

export interface DetectionManifest {
  name: string;
  mode: "staircase" | "fixed";
  fixed_duration_ms?: number;
  stimuli: DetectionStimulus[];
  mask_png_base64?: string;
  fixation_ms?: number;
  mask_ms?: number;
  initial_duration_ms?: number;
}
