// Node bindings for the almatch engine.
//
// The binding keeps a configured matcher handle with two methods: fit stores
// a holdout table, predict hands a matching table plus the stored holdout to
// the almatch command-line interface in a temporary directory and parses the
// files it writes back into plain objects.  All matching and estimation
// happens in the Python core; this layer only converts data.

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { parseCsv, serializeCsv, Row, Table } from "./csv.js";

export { parseCsv, serializeCsv } from "./csv.js";
export type { Row, Table } from "./csv.js";

export type Algorithm = "flame" | "dame" | "hybrid";
export type MissingPolicy = "drop" | "impute" | "sentinel";

// Mirrors the command-line flags, camelCased.  Every field except the two
// column names is optional and falls back to the core's own default.
export interface MatcherConfig {
  treatmentCol: string;
  outcomeCol: string;
  algorithm?: Algorithm;
  c?: number;
  flameIters?: number;
  missing?: MissingPolicy;
  imputeCount?: number; // must be 1; multiple imputation stays a CLI feature
  replacement?: boolean;
  maxIterations?: number;
  minUnmatchedTreated?: number;
  minUnmatchedControl?: number;
  peRise?: number;
  bfFloor?: number;
  ridgeLambda?: number;
  naToken?: string;
  seed?: number;
}

export interface Effects {
  ate: number | null;
  att: number | null;
  n_units: number;
  n_groups: number;
}

export interface Group {
  group_id: number;
  iteration: number;
  on_set: string[];
  signature: Record<string, string>;
  treated_ids: Array<number | string>;
  control_ids: Array<number | string>;
  n_treated: number;
  n_control: number;
  cate: number;
}

export interface IterationRow {
  iteration: number;
  phase: string;
  dropped: string[];
  pe: number;
  bf: number;
  mq: number | null;
  n_newly_matched: number;
  cumulative_matched: number;
}

export interface PredictResult {
  matchedColumns: string[];
  matched: Row[]; // starred table, cells kept as strings
  groups: Group[];
  effects: Effects;
  iterations: IterationRow[];
  stopReason: string;
}

export class UnfittedHandleError extends Error {
  constructor() {
    super("predict called before fit; provide a holdout table first");
    this.name = "UnfittedHandleError";
  }
}

const ALGORITHMS: Algorithm[] = ["flame", "dame", "hybrid"];
const MISSING_POLICIES: MissingPolicy[] = ["drop", "impute", "sentinel"];

function pythonExecutable(): string {
  return process.env.ALMATCH_PYTHON || "python3";
}

function asTreatmentBit(token: string): 0 | 1 | null {
  const value = Number(token.trim());
  if (value === 0) return 0;
  if (value === 1) return 1;
  return null;
}

// Cheap structural checks done at fit time so a bad holdout fails before any
// subprocess is spawned.  Everything deeper is the core's job.
function checkHoldout(table: Table, config: MatcherConfig): void {
  if (table.rows.length === 0) {
    throw new Error("holdout table has no rows");
  }
  for (const col of [config.treatmentCol, config.outcomeCol]) {
    if (!table.columns.includes(col)) {
      throw new Error(`holdout table has no column '${col}'`);
    }
  }
  let treated = 0;
  let control = 0;
  table.rows.forEach((row, i) => {
    const bit = asTreatmentBit(row[config.treatmentCol] ?? "");
    if (bit === null) {
      throw new Error(
        `holdout treatment column '${config.treatmentCol}', row ${i + 1}: ` +
          `value ${JSON.stringify(row[config.treatmentCol])} is not 0/1`
      );
    }
    if (bit === 1) treated += 1;
    else control += 1;
    const outcome = Number((row[config.outcomeCol] ?? "").trim());
    if (!Number.isFinite(outcome)) {
      throw new Error(
        `holdout outcome column '${config.outcomeCol}', row ${i + 1}: ` +
          `value ${JSON.stringify(row[config.outcomeCol])} is not numeric`
      );
    }
  });
  if (treated === 0 || control === 0) {
    throw new Error(
      `holdout has ${treated} treated and ${control} control rows; ` +
        "both arms are required to fit predictors"
    );
  }
}

function cloneTable(table: Table): Table {
  return {
    columns: [...table.columns],
    rows: table.rows.map((row) => ({ ...row })),
  };
}

function buildArgs(config: MatcherConfig, matchingPath: string, holdoutPath: string, outDir: string): string[] {
  const args = [
    "-m",
    "almatch",
    "--input",
    matchingPath,
    "--holdout",
    holdoutPath,
    "--treatment-col",
    config.treatmentCol,
    "--outcome-col",
    config.outcomeCol,
    "--output-dir",
    outDir,
  ];
  const push = (flag: string, value: number | string | undefined) => {
    if (value !== undefined) args.push(flag, String(value));
  };
  push("--algorithm", config.algorithm);
  push("--c", config.c);
  push("--flame-iters", config.flameIters);
  push("--missing", config.missing);
  if (config.replacement) args.push("--replacement");
  push("--max-iterations", config.maxIterations);
  push("--min-unmatched-treated", config.minUnmatchedTreated);
  push("--min-unmatched-control", config.minUnmatchedControl);
  push("--pe-rise", config.peRise);
  push("--bf-floor", config.bfFloor);
  push("--ridge-lambda", config.ridgeLambda);
  push("--na-token", config.naToken);
  push("--seed", config.seed);
  return args;
}

function parseIterations(text: string): IterationRow[] {
  const table = parseCsv(text);
  return table.rows.map((row) => ({
    iteration: Number(row.iteration),
    phase: row.phase,
    dropped: row.dropped === "" ? [] : row.dropped.split("|"),
    pe: Number(row.pe),
    bf: Number(row.bf),
    mq: row.mq === "" ? null : Number(row.mq),
    n_newly_matched: Number(row.n_newly_matched),
    cumulative_matched: Number(row.cumulative_matched),
  }));
}

export class Matcher {
  private readonly config: MatcherConfig;
  private holdout: Table | null = null;

  constructor(config: MatcherConfig) {
    if (!config.treatmentCol || !config.outcomeCol) {
      throw new Error("treatmentCol and outcomeCol are required");
    }
    if (config.algorithm !== undefined && !ALGORITHMS.includes(config.algorithm)) {
      throw new Error(`unknown algorithm '${config.algorithm}'`);
    }
    if (config.missing !== undefined && !MISSING_POLICIES.includes(config.missing)) {
      throw new Error(`unknown missing policy '${config.missing}'`);
    }
    if (config.imputeCount !== undefined && config.imputeCount !== 1) {
      throw new Error(
        "imputeCount must be 1 in the binding; run the almatch CLI directly for multiple imputations"
      );
    }
    if (config.algorithm === "hybrid" && config.flameIters === undefined) {
      throw new Error("hybrid algorithm needs flameIters");
    }
    this.config = { ...config };
  }

  get fitted(): boolean {
    return this.holdout !== null;
  }

  // Store the holdout that later predict calls will train predictors on.
  // A second fit replaces the first holdout.
  fit(holdout: Table): this {
    checkHoldout(holdout, this.config);
    this.holdout = cloneTable(holdout);
    return this;
  }

  // Run the core on a matching table and return its outputs as objects.
  predict(matching: Table): PredictResult {
    if (this.holdout === null) {
      throw new UnfittedHandleError();
    }
    if (matching.rows.length === 0) {
      throw new Error("matching table has no rows");
    }
    for (const col of [this.config.treatmentCol, this.config.outcomeCol]) {
      if (!matching.columns.includes(col)) {
        throw new Error(`matching table has no column '${col}'`);
      }
    }

    const workDir = mkdtempSync(join(tmpdir(), "almatch-"));
    try {
      const matchingPath = join(workDir, "matching.csv");
      const holdoutPath = join(workDir, "holdout.csv");
      const outDir = join(workDir, "out");
      writeFileSync(matchingPath, serializeCsv(matching.columns, matching.rows));
      writeFileSync(holdoutPath, serializeCsv(this.holdout.columns, this.holdout.rows));

      const result = spawnSync(pythonExecutable(), buildArgs(this.config, matchingPath, holdoutPath, outDir), {
        encoding: "utf8",
        maxBuffer: 64 * 1024 * 1024,
      });
      if (result.error) {
        throw new Error(`failed to launch ${pythonExecutable()}: ${result.error.message}`);
      }
      if (result.status !== 0) {
        const detail = (result.stderr || result.stdout || "").trim();
        throw new Error(`almatch exited with status ${result.status}: ${detail}`);
      }

      const matched = parseCsv(readFileSync(join(outDir, "matched.csv"), "utf8"));
      const groups = JSON.parse(readFileSync(join(outDir, "groups.json"), "utf8")) as Group[];
      const effects = JSON.parse(readFileSync(join(outDir, "effects.json"), "utf8")) as Effects;
      const iterations = parseIterations(readFileSync(join(outDir, "iterations.csv"), "utf8"));
      const manifest = JSON.parse(readFileSync(join(outDir, "manifest.json"), "utf8"));

      return {
        matchedColumns: matched.columns,
        matched: matched.rows,
        groups,
        effects,
        iterations,
        stopReason: String(manifest.stop_reasons[0]),
      };
    } finally {
      rmSync(workDir, { recursive: true, force: true });
    }
  }
}
