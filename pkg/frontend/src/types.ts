/** Payload shapes of the session service. The UI renders these verbatim;
 * it never derives utilities, probabilities or samples on its own. */

export interface DimensionSpec {
  name: string;
  min: number;
  max: number;
  step: number;
}

export interface ActionView {
  index: number;
  coords: number[];
}

export interface SessionStatePayload {
  id: string;
  phase: "awaiting_feedback" | "ready_to_advance" | "finished";
  iteration: number;
  total_iterations: number;
  feedback_types: string[];
  dimensions: DimensionSpec[];
  ordinal_categories: string[];
  counts: { preferences: number; coactive: number; ordinal: number };
  visited_count: number;
  optimum_estimate: ActionView | null;
  config_digest: string;
}

export interface ComparisonPrompt {
  pair: [number, number];
  actions: [ActionView, ActionView];
}

export interface QueryPayload {
  iteration: number;
  comparisons: ComparisonPrompt[];
  coactive_prompts: ActionView[];
  ordinal_prompts: ActionView[];
  ordinal_categories: string[];
}

export interface ProjectionPayload {
  dims: [number, number];
  dim_names: [string, string];
  row_values: number[];
  col_values: number[];
  values: (number | null)[][];
}

export interface PosteriorPayload {
  subset: number[];
  coords: number[][];
  mean: number[];
  std: number[];
  diagnostics: Record<string, unknown>;
  optimum_estimate: ActionView | null;
  visited: ActionView[];
  projections: ProjectionPayload[];
}

export interface AdvanceTiming {
  posterior_updates: { stage: string; subset_size: number; duration_s: number }[];
  posterior_update_seconds: number;
  total_seconds: number;
}

export interface AdvancePayload {
  state: SessionStatePayload;
  new_actions: ActionView[];
  timing: AdvanceTiming;
}

export interface FeedbackBody {
  comparisons: { pair: [number, number]; winner: number | null }[];
  coactive: { action: number; suggestion: number[] | null }[];
  ordinal: { action: number; label: number | null }[];
}

export interface SessionConfigDocument {
  space: { dimensions: DimensionSpec[] };
  sampler: Record<string, unknown>;
  kernel: Record<string, unknown>;
  noise: { c_p: number; c_c: number; c_o: number };
  ordinal: { num_categories: number; names?: string[]; thresholds?: number[] };
  iterations: number;
  feedback_types: string[];
  source: "human";
}
