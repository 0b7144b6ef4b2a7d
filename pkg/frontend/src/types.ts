// Wire types mirroring the service JSON. The cockpit renders these verbatim;
// it never derives workflow decisions itself.

export interface Prompt {
  text: string;
  origin: "captioner" | "user";
}

export interface NextAction {
  mode: "Subtraction" | "Projection";
  strategy: string | { kind: "custom"; rule: Record<string, string> | null };
  grid: number[];
  needs_manual: boolean;
}

export interface Sweep {
  id: string;
  mode: "Subtraction" | "Projection";
  strategy: NextAction["strategy"];
  grid: number[];
  images: (string | null)[];
  errors: (string | null)[];
  sampler: { seed: number; steps: number; guidance_scale: number };
  elapsed: number;
}

export interface Verdict {
  kind: "Success" | "Overfit" | "Underfit";
  chosen_image?: number | null;
  intention?: "Structure" | "Appearance" | null;
  sweep_id?: string | null;
}

export interface WorkflowState {
  value: "Created" | "Finetuning" | "AwaitingVerdict" | "Done" | "Failed";
  last_recommendation: NextAction | null;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  session_id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  message: string;
}

export interface SessionView {
  id: string;
  input_image: string;
  source_prompt: Prompt;
  target_prompt: Prompt;
  checkpoints: { original: string | null; finetuned: string | null };
  optimized_embedding: string | null;
  sweeps: Sweep[];
  verdicts: Verdict[];
  state: WorkflowState;
  sampler_seed: number;
  final_choice: { sweep_id: string; image_index: number } | null;
  created_at: string;
  updated_at: string;
  active_job?: JobStatus | null;
  job_id?: string;
}

export interface SessionSummary {
  id: string;
  state: WorkflowState["value"];
  target_prompt: string;
  sweep_count: number;
  created_at: string;
  updated_at: string;
}

export function strategyLabel(strategy: NextAction["strategy"]): string {
  return typeof strategy === "string" ? strategy : "custom";
}
