/**
 * Wire types for the /v1 API.
 *
 * These mirror contract/query_trace.schema.json at the repository root;
 * the console never recomputes any of these values, it only displays them.
 */

export interface ColumnRef {
  table: string;
  column: string;
}

export interface JoinRelation {
  left: ColumnRef;
  right: ColumnRef;
}

export interface ConditionValue {
  column: ColumnRef;
  literal: string;
}

export interface LinkedSchema {
  tables: string[];
  columns: ColumnRef[];
  join_relations: JoinRelation[];
  condition_values: ConditionValue[];
  rationale: string;
  warnings?: string[];
}

export interface Repair {
  kind: "constant_fix" | "regenerated";
  before: string;
  after: string;
  reason: string;
}

export interface SqlCandidate {
  sql: string;
  turn: number;
  repairs: Repair[];
  executable: boolean;
  last_error: string | null;
}

export interface CriticVerdict {
  chosen_index: number;
  method: "parsed" | "fallback_first_executable" | "fallback_first";
  raw_response: string;
}

export interface QueryTrace {
  question: string;
  linked: LinkedSchema;
  prompts: Record<string, string>;
  candidates: SqlCandidate[];
  verdict: CriticVerdict;
  chosen_sql: string;
  result_rows: unknown[][] | null;
  timings: Record<string, number>;
}

export interface AblationFlags {
  use_primary_key: boolean;
  use_foreign_key: boolean;
  use_one_to_many: boolean;
  use_enums: boolean;
  use_schema_linking: boolean;
  use_cot: boolean;
  use_constant_fix: boolean;
  use_execution_check: boolean;
  use_critic: boolean;
  prompt_style: "code_representation" | "natural_language" | "sqlfuse";
}

export const DEFAULT_FLAGS: AblationFlags = {
  use_primary_key: true,
  use_foreign_key: true,
  use_one_to_many: true,
  use_enums: true,
  use_schema_linking: true,
  use_cot: true,
  use_constant_fix: true,
  use_execution_check: true,
  use_critic: true,
  prompt_style: "sqlfuse",
};

export interface QueryRequest {
  question: string;
  database_id: string;
  flags?: Partial<AblationFlags>;
}
