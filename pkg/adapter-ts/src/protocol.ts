/**
 * Request/reply state machine for the stdio wire protocol.
 *
 * One JSON request per line in, exactly one JSON reply per line out.
 * A malformed or failing request produces {"ok":false,"error":...} and
 * the session keeps serving; only "shutdown" (or closed stdin) ends it.
 */

import { AdapterConfig, fitConfigured, parseConfig } from "./config.js";
import { Model } from "./families.js";

export const PROTOCOL_VERSION = 1;

export interface Outcome {
  reply: string;
  done: boolean;
}

function snippet(line: string): string {
  const flat = line.trim();
  return flat.length > 80 ? `${flat.slice(0, 77)}...` : flat;
}

function describeError(err: unknown): string {
  if (err instanceof Error) {
    const frame = err.stack?.split("\n")[1]?.trim();
    return frame !== undefined ? `${err.message} (${frame})` : err.message;
  }
  return String(err);
}

function checkMatrix(value: unknown, label: string): number[][] {
  if (!Array.isArray(value) || value.length === 0) {
    throw new Error(`${label} must be a non-empty list of rows`);
  }
  const width = Array.isArray(value[0]) ? value[0].length : -1;
  for (const row of value) {
    if (!Array.isArray(row) || row.length !== width || width === 0) {
      throw new Error(`${label} rows must all have the same non-zero length`);
    }
    for (const cell of row) {
      if (typeof cell !== "number" || !Number.isFinite(cell)) {
        throw new Error(`${label} entries must be finite numbers`);
      }
    }
  }
  return value as number[][];
}

export class Session {
  private config: AdapterConfig | null = null;
  private model: Model | null = null;
  private fittedWidth = 0;

  constructor(
    private rawConfig: unknown,
    private log: (line: string) => void = () => {},
  ) {}

  handle(line: string): Outcome {
    let request: unknown;
    try {
      request = JSON.parse(line);
    } catch {
      return this.error(`request is not valid JSON: ${snippet(line)}`);
    }
    if (typeof request !== "object" || request === null || Array.isArray(request)) {
      return this.error("request must be a JSON object");
    }
    const body = request as Record<string, unknown>;
    try {
      switch (body.cmd) {
        case "handshake":
          return this.onHandshake(body);
        case "fit":
          return this.onFit(body);
        case "predict_proba":
          return this.onPredict(body);
        case "importance_supported?":
          return this.ok({ supported: false });
        case "shutdown":
          this.log("shutdown");
          return { ...this.ok({}), done: true };
        default:
          return this.error(`unknown cmd: ${JSON.stringify(body.cmd)}`);
      }
    } catch (err) {
      return this.error(describeError(err));
    }
  }

  private onHandshake(body: Record<string, unknown>): Outcome {
    if (body.version !== PROTOCOL_VERSION) {
      return this.error(
        `unsupported protocol version ${JSON.stringify(body.version)}, expected ${PROTOCOL_VERSION}`,
      );
    }
    this.config = parseConfig(this.rawConfig);
    this.log(`handshake ok family=${this.config.family} tuned=${this.config.tuned}`);
    return this.ok({});
  }

  private onFit(body: Record<string, unknown>): Outcome {
    if (this.config === null) {
      return this.error("handshake required before fit");
    }
    const X = checkMatrix(body.X, "X");
    const y = body.y;
    if (!Array.isArray(y) || y.length !== X.length) {
      return this.error("y must be a list with one label per row of X");
    }
    for (const label of y) {
      if (label !== 0 && label !== 1) {
        return this.error("y labels must be 0 or 1");
      }
    }
    const seed = body.seed;
    if (typeof seed !== "number" || !Number.isInteger(seed) || seed < 0) {
      return this.error("seed must be a non-negative integer");
    }
    this.model = fitConfigured(this.config, X, y as number[], seed);
    this.fittedWidth = X[0].length;
    this.log(`fit n=${X.length} d=${this.fittedWidth} seed=${seed}`);
    return this.ok({});
  }

  private onPredict(body: Record<string, unknown>): Outcome {
    if (this.model === null) {
      return this.error("not fitted");
    }
    const X = checkMatrix(body.X, "X");
    if (X[0].length !== this.fittedWidth) {
      return this.error(
        `feature width mismatch: fitted on ${this.fittedWidth}, got ${X[0].length}`,
      );
    }
    const proba = this.model.predictProba(X).map((p) => {
      if (!Number.isFinite(p)) {
        throw new Error("model produced a non-finite probability");
      }
      return Math.min(1, Math.max(0, p));
    });
    return this.ok({ proba });
  }

  private ok(extra: Record<string, unknown>): Outcome {
    return { reply: JSON.stringify({ ok: true, ...extra }), done: false };
  }

  private error(message: string): Outcome {
    return { reply: JSON.stringify({ ok: false, error: message }), done: false };
  }
}
