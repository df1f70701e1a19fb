/** In-memory session server implementing the semantics of docs/api.md v1:
 * scheduled pairs with per-trial placement, idempotent trial issuing,
 * conflict/not-found token handling, win tallies, advance, the minimum-trial
 * terminate guard and best-win reconstruction. Used as the Transport behind
 * the client in tests.
 */

import type { Transport, TransportResponse } from "../src/api.js";
import type { DetectionTrialRecord } from "../src/types.js";

// deterministic PRNG so placement statistics are reproducible
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface Individual {
  id: string;
  png: string;
}

interface MockGeneration {
  index: number;
  population: Individual[];
  schedule: Array<[number, number]>;
  wins: number[];
  answered: boolean[];
}

export interface LogRecord {
  generation: number;
  pair_index: number;
  left_slot: number;
  right_slot: number;
  choice: "left" | "right";
}

interface MockSession {
  id: string;
  mode: string;
  label: string;
  seed: number;
  population: number;
  views: number;
  minTrials: number;
  generation: MockGeneration;
  totalAnswered: number;
  log: LogRecord[];
  outstanding: { pairIndex: number; left: number; right: number; token: string } | null;
  terminated: null | { bestId: string; bestSlot: number; bestWins: number; generation: number };
  lastComplete: MockGeneration | null;
}

function fakePng(generation: number, slot: number, rng: () => number): string {
  // unique, deterministic, base64-ish payload standing in for real pixels
  return btoa(`g${generation}-s${slot}-${Math.floor(rng() * 1e9)}`);
}

function makeSchedule(population: number, views: number, rng: () => number): Array<[number, number]> {
  const slots: number[] = [];
  for (let i = 0; i < population; i++) for (let v = 0; v < views; v++) slots.push(i);
  for (let i = slots.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [slots[i], slots[j]] = [slots[j]!, slots[i]!];
  }
  const pairs: Array<[number, number]> = [];
  for (let i = 0; i < slots.length; i += 2) pairs.push([slots[i]!, slots[i + 1]!]);
  for (let p = 0; p < pairs.length; p++) {
    while (pairs[p]![0] === pairs[p]![1]) {
      const q = Math.floor(rng() * pairs.length);
      if (q === p) continue;
      const [a, b] = pairs[p]!;
      const [c, d] = pairs[q]!;
      if (c !== b && a !== d) {
        pairs[p]![1] = d;
        pairs[q]![1] = b;
      }
    }
  }
  return pairs;
}

function makeGeneration(index: number, population: number, views: number, seed: number): MockGeneration {
  const rng = mulberry32(seed * 7919 + index);
  return {
    index,
    population: Array.from({ length: population }, (_, slot) => ({
      id: `g${index}-s${slot}`,
      png: fakePng(index, slot, rng),
    })),
    schedule: makeSchedule(population, views, rng),
    wins: new Array(population).fill(0),
    answered: new Array(population * views / 2).fill(false),
  };
}

function bestOf(generation: MockGeneration): { bestId: string; bestSlot: number; bestWins: number } {
  let bestSlot = 0;
  for (let i = 1; i < generation.wins.length; i++) {
    if (generation.wins[i]! > generation.wins[bestSlot]!) bestSlot = i;
  }
  return {
    bestSlot,
    bestId: generation.population[bestSlot]!.id,
    bestWins: generation.wins[bestSlot]!,
  };
}

const err = (status: number, category: string, message = category): TransportResponse => ({
  status,
  body: { error: { category, message } },
});

const ok = (body: unknown, status = 200): TransportResponse => ({ status, body });

export class MockServer {
  sessions = new Map<string, MockSession>();
  detectionLogs = new Map<string, DetectionTrialRecord[]>();
  private counter = 0;

  /** Fail the next `n` transport calls before reaching the server. */
  failNext = 0;

  get transport(): Transport {
    return async (method, path, body) => {
      if (this.failNext > 0) {
        this.failNext -= 1;
        throw new TypeError("NetworkError: connection refused");
      }
      return this.route(method, path, body as Record<string, unknown> | undefined);
    };
  }

  session(id: string): MockSession {
    const session = this.sessions.get(id);
    if (!session) throw new Error(`mock: no session ${id}`);
    return session;
  }

  private status(session: MockSession) {
    const answered = session.generation.answered.filter(Boolean).length;
    return {
      session_id: session.id,
      mode: session.mode,
      label: session.label,
      status: session.terminated
        ? "terminated"
        : answered === session.generation.schedule.length
          ? "awaiting-advance"
          : "active",
      generation: session.generation.index,
      answered,
      scheduled: session.generation.schedule.length,
      total_answered: session.totalAnswered,
      population: session.population,
      views: session.views,
      min_trials_to_terminate: session.minTrials,
    };
  }

  private route(method: string, path: string, body?: Record<string, unknown>): TransportResponse {
    if (method === "POST" && path === "/sessions") {
      const config = (body?.config ?? {}) as Record<string, number>;
      const population = config.population ?? 100;
      const views = config.views ?? 5;
      const seed = (body?.seed as number | undefined) ?? 1;
      const id = (body?.session_id as string | undefined) ?? `mock-${this.counter++}`;
      const session: MockSession = {
        id,
        mode: (body?.mode as string) ?? "concept-target",
        label: (body?.label as string) ?? "",
        seed,
        population,
        views,
        minTrials: (body?.min_trials_to_terminate as number | undefined) ?? 750,
        generation: makeGeneration(1, population, views, seed),
        totalAnswered: 0,
        log: [],
        outstanding: null,
        terminated: null,
        lastComplete: null,
      };
      this.sessions.set(id, session);
      return ok(this.status(session), 201);
    }

    const match = path.match(/^\/sessions\/([^/]+)(\/.*)?$/);
    if (path === "/detection-logs" && method === "POST") {
      const trials = body?.trials as DetectionTrialRecord[] | undefined;
      if (!Array.isArray(trials) || trials.length === 0) return err(400, "invalid_input");
      const name = (body?.name as string | undefined) ?? `detection-${this.detectionLogs.size}`;
      this.detectionLogs.set(name, trials);
      return ok({ stored: `${name}.jsonl`, summary: { n_trials: trials.length } }, 201);
    }
    if (!match) return err(404, "not_found", path);
    const session = this.sessions.get(match[1]!);
    if (!session) return err(404, "not_found", match[1]!);
    const rest = match[2] ?? "";

    if (method === "GET" && rest === "") return ok(this.status(session));

    if (method === "GET" && rest === "/trial") {
      if (session.terminated) return err(410, "gone");
      if (!session.outstanding) {
        const next = session.generation.answered.indexOf(false);
        if (next === -1) return err(409, "await_advance");
        const [i, j] = session.generation.schedule[next]!;
        const placeRng = mulberry32(session.seed * 31 + session.generation.index * 1009 + next);
        const leftFirst = placeRng() < 0.5;
        session.outstanding = {
          pairIndex: next,
          left: leftFirst ? i : j,
          right: leftFirst ? j : i,
          token: `g${session.generation.index}-p${next}`,
        };
      }
      const out = session.outstanding;
      const gen = session.generation;
      return ok({
        token: out.token,
        generation: gen.index,
        pair_index: out.pairIndex,
        progress: {
          answered: gen.answered.filter(Boolean).length,
          scheduled: gen.schedule.length,
        },
        left: { image_id: gen.population[out.left]!.id, png_base64: gen.population[out.left]!.png },
        right: { image_id: gen.population[out.right]!.id, png_base64: gen.population[out.right]!.png },
        target:
          session.mode === "image-target"
            ? { kind: "image", url: `/sessions/${session.id}/target` }
            : { kind: "label", text: session.label },
      });
    }

    if (method === "POST" && rest === "/choices") {
      if (session.terminated) return err(410, "gone");
      const token = body?.token as string;
      const choice = body?.choice as "left" | "right";
      const parsed = /^g(\d+)-p(\d+)$/.exec(token ?? "");
      if (!parsed) return err(404, "not_found", `malformed ${token}`);
      const tokenGen = Number(parsed[1]);
      const pairIndex = Number(parsed[2]);
      const gen = session.generation;
      if (tokenGen < gen.index || (tokenGen === gen.index && gen.answered[pairIndex])) {
        return err(409, "conflict", `trial ${token} already answered`);
      }
      if (!session.outstanding || session.outstanding.token !== token) {
        return err(404, "not_found", `trial ${token} was never issued`);
      }
      const out = session.outstanding;
      const winner = choice === "left" ? out.left : out.right;
      gen.wins[winner]! += 1;
      gen.answered[pairIndex] = true;
      session.totalAnswered += 1;
      session.log.push({
        generation: gen.index,
        pair_index: pairIndex,
        left_slot: out.left,
        right_slot: out.right,
        choice,
      });
      session.outstanding = null;
      const answered = gen.answered.filter(Boolean).length;
      return ok({
        answered,
        scheduled: gen.schedule.length,
        generation_complete: answered === gen.schedule.length,
        total_answered: session.totalAnswered,
      });
    }

    if (method === "POST" && rest === "/advance") {
      if (session.terminated) return err(410, "gone");
      if (session.generation.answered.some((a) => !a)) return err(409, "conflict", "open trials remain");
      session.lastComplete = session.generation;
      session.generation = makeGeneration(
        session.generation.index + 1,
        session.population,
        session.views,
        session.seed,
      );
      session.outstanding = null;
      return ok({
        generation: session.generation.index,
        migration_rate: 0.6 * 0.5 ** (session.generation.index - 2),
        provenance: { winner: session.population },
      });
    }

    if (method === "POST" && rest === "/terminate") {
      if (session.terminated) return ok({ status: "terminated", ...session.terminated });
      const complete = session.generation.answered.every(Boolean)
        ? session.generation
        : session.lastComplete;
      if (!complete) return err(409, "conflict", "no completed generation");
      if (!body?.force && session.totalAnswered < session.minTrials) {
        return err(409, "too_early", `${session.totalAnswered} < ${session.minTrials}`);
      }
      const best = bestOf(complete);
      session.terminated = { ...best, generation: complete.index };
      return ok({
        status: "terminated",
        generation: complete.index,
        best_id: best.bestId,
        best_slot: best.bestSlot,
        best_wins: best.bestWins,
        total_answered: session.totalAnswered,
      });
    }

    if (method === "GET" && rest === "/reconstruction") {
      const complete = session.generation.answered.every(Boolean)
        ? session.generation
        : session.lastComplete;
      if (!complete) return err(409, "conflict", "no completed generation");
      const best = bestOf(complete);
      return ok({
        generation: complete.index,
        best_id: best.bestId,
        best_slot: best.bestSlot,
        best_wins: best.bestWins,
        best_png_base64: complete.population[best.bestSlot]!.png,
        mean_png_base64: btoa(`mean-g${complete.index}`),
      });
    }

    return err(404, "not_found", `${method} ${path}`);
  }
}
