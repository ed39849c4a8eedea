// Thin typed client for the extraction service. The UI performs no
// extraction logic of its own; everything shown comes from these calls.

export interface MatchPayload {
  value: string;
  stage: "fuzzy_regex" | "ner" | "llm";
  confidence: number;
  span?: [number, number];
}

export interface QueryPayload {
  raw: string;
  key: string;
  category: string;
}

export interface RetrievalPayload {
  query: QueryPayload;
  matches: MatchPayload[];
  stage_fired: string | null;
  stages_attempted: string[];
  errors: string[];
}

export interface ExtractedPayload {
  text: string;
  language: string;
  stages_applied: string[];
  warnings: string[];
}

export interface UploadPayload {
  doc_id: string;
  format: string;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

declare global {
  interface Window {
    DOCFIELDS_API_BASE?: string;
  }
}

export function apiBase(): string {
  return (typeof window !== "undefined" && window.DOCFIELDS_API_BASE) || "http://127.0.0.1:8600";
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message);
}

async function postJson<T>(path: string, payload: unknown): Promise<T> {
  const response = await fetch(apiBase() + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  if (!response.ok) {
    throw await parseError(response);
  }
  return (await response.json()) as T;
}

export async function health(): Promise<{ status: string; version: string }> {
  const response = await fetch(apiBase() + "/health");
  if (!response.ok) {
    throw await parseError(response);
  }
  return await response.json();
}

function readFileBytes(file: Blob): Promise<ArrayBuffer> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(reader.result as ArrayBuffer);
    reader.onerror = () => reject(reader.error);
    reader.readAsArrayBuffer(file);
  });
}

// The multipart body is assembled by hand so uploads behave identically in
// browsers and in the jsdom test environment, whose FormData is not
// accepted by the Node fetch implementation.
export async function uploadDocument(file: File): Promise<UploadPayload> {
  const boundary = "----docfields" + Math.random().toString(36).slice(2);
  const bytes = new Uint8Array(await readFileBytes(file));
  const head =
    `--${boundary}\r\n` +
    `Content-Disposition: form-data; name="file"; filename="${file.name.replace(/"/g, "")}"\r\n` +
    `Content-Type: application/octet-stream\r\n\r\n`;
  const tail = `\r\n--${boundary}--\r\n`;
  const encoder = new TextEncoder();
  const headBytes = encoder.encode(head);
  const tailBytes = encoder.encode(tail);
  const body = new Uint8Array(headBytes.length + bytes.length + tailBytes.length);
  body.set(headBytes, 0);
  body.set(bytes, headBytes.length);
  body.set(tailBytes, headBytes.length + bytes.length);
  const response = await fetch(apiBase() + "/documents", {
    method: "POST",
    headers: { "Content-Type": `multipart/form-data; boundary=${boundary}` },
    body,
  });
  if (!response.ok) {
    throw await parseError(response);
  }
  return await response.json();
}

export async function extractText(req: { doc_id?: string; text?: string }): Promise<ExtractedPayload> {
  return postJson<ExtractedPayload>("/extract-text", req);
}

export async function retrieveFields(
  req: { doc_id?: string; text?: string },
  fields: string[],
): Promise<RetrievalPayload[]> {
  return postJson<RetrievalPayload[]>("/retrieve", { ...req, fields });
}
