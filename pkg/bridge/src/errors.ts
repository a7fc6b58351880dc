export type ErrorCode =
  | "MODEL_UNAVAILABLE"
  | "DATASET_NOT_FOUND"
  | "FORMAT_ERROR"
  | "PARAM_ERROR"
  | "IO_ERROR";

export class BridgeError extends Error {
  constructor(public readonly code: ErrorCode, message: string) {
    super(`[${code}] ${message}`);
    this.name = "BridgeError";
  }
}
