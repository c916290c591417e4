/** Parsing of the harness run.jsonl format (one meta line, then records). */

export interface EgoRecord {
  x: number;
  y: number;
  psi: number;
  psidot: number;
  vx: number;
  vy: number;
}

export interface ObstacleRecord {
  id: number;
  x: number;
  y: number;
  vx: number;
  vy: number;
  lane: number;
}

export interface CycleRecord {
  cycle: number;
  t: number;
  ego: EgoRecord;
  obstacles: ObstacleRecord[];
  goal_lanes: number[];
  meta_costs: number[];
  feasible: boolean[];
  best_index: number | null;
  residual_iters: number;
  residuals_best: { obs: number[]; acc: number[]; nonhol: number[] };
  candidates?: { x: number[][]; y: number[][]; psi: number[][]; v: number[][] };
}

export interface RunMeta {
  type: string;
  kind: string;
  lanes: number;
  lane_width: number;
  ellipse: { a: number; b: number };
  y_rl: number;
  grid_times: number[];
  emit_candidates: boolean;
}

export interface RunLog {
  meta: RunMeta;
  records: CycleRecord[];
}

export function parseRunLog(text: string): RunLog {
  let meta: RunMeta | null = null;
  const records: CycleRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    const obj = JSON.parse(trimmed);
    if (obj.type === "meta") {
      meta = obj as RunMeta;
    } else {
      records.push(obj as CycleRecord);
    }
  }
  if (meta === null) {
    throw new Error("run log has no meta line");
  }
  if (records.length === 0) {
    throw new Error("run log has no cycle records");
  }
  return { meta, records };
}

export function recordForCycle(log: RunLog, cycle: number): CycleRecord {
  const rec = log.records.find((r) => r.cycle === cycle);
  if (rec === undefined) {
    throw new Error(
      `cycle ${cycle} not in log (have ${log.records[0].cycle}..${log.records[log.records.length - 1].cycle})`,
    );
  }
  return rec;
}
