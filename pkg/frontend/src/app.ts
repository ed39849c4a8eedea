// Interactive session: load a document (upload or paste), inspect the
// extracted text, and query fields against the retrieval cascade. Results
// carry a stage badge (fuzzy-regex / NER / LLM) and highlight their source
// span in the preview when one exists.

import {
  ApiError,
  ExtractedPayload,
  RetrievalPayload,
  extractText,
  health,
  retrieveFields,
  uploadDocument,
} from "./api";

export const FIELD_SUGGESTIONS = [
  "e-mail",
  "phone number",
  "website",
  "IBAN",
  "invoice date",
  "total amount",
  "address",
  "postal code",
  "VAT number",
  "name",
  "company",
  "city",
  "languages",
];

interface HistoryEntry {
  raw: string;
  result: RetrievalPayload | null;
  error: string | null;
}

interface Session {
  docId: string | null;
  inlineText: string | null;
  extracted: ExtractedPayload | null;
  history: HistoryEntry[];
}

export const session: Session = { docId: null, inlineText: null, extracted: null, history: [] };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let retryAction: (() => void) | null = null;

function showBanner(message: string, retry: (() => void) | null): void {
  retryAction = retry;
  el<HTMLDivElement>("banner-message").textContent = message;
  el<HTMLButtonElement>("banner-retry").hidden = retry === null;
  el<HTMLDivElement>("banner").hidden = false;
}

function hideBanner(): void {
  retryAction = null;
  el<HTMLDivElement>("banner").hidden = true;
}

function describeError(err: unknown): { message: string; serviceDown: boolean } {
  if (err instanceof ApiError) {
    return { message: `${err.code}: ${err.message}`, serviceDown: false };
  }
  return { message: "Service unreachable. Is the extraction service running?", serviceDown: true };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderPreview(highlight: [number, number] | null): void {
  const preview = el<HTMLPreElement>("preview");
  const extracted = session.extracted;
  if (!extracted) {
    preview.innerHTML = '<span class="placeholder">No document loaded yet.</span>';
    return;
  }
  const text = extracted.text;
  if (highlight) {
    const [start, end] = highlight;
    preview.innerHTML =
      escapeHtml(text.slice(0, start)) +
      `<mark id="span-highlight">${escapeHtml(text.slice(start, end))}</mark>` +
      escapeHtml(text.slice(end));
  } else {
    preview.innerHTML = escapeHtml(text);
  }
  el<HTMLSpanElement>("language-tag").textContent = extracted.language;
  el<HTMLSpanElement>("stages-tag").textContent = extracted.stages_applied.join(" → ") || "none";
}

function stageBadge(stage: string): string {
  const labels: Record<string, string> = { fuzzy_regex: "fuzzy regex", ner: "NER", llm: "LLM" };
  return `<span class="badge badge-${stage.replace("_", "-")}" data-stage="${stage}">${labels[stage] ?? stage}</span>`;
}

function renderRow(row: HTMLTableRowElement, entry: HistoryEntry): void {
  const queryCell = `<td class="query">${escapeHtml(entry.raw)}</td>`;
  if (entry.error !== null) {
    row.innerHTML = queryCell + `<td colspan="3" class="row-error">${escapeHtml(entry.error)}</td>`;
    return;
  }
  if (entry.result === null) {
    row.innerHTML = queryCell + '<td colspan="3" class="pending">…</td>';
    return;
  }
  const result = entry.result;
  if (result.matches.length === 0) {
    const note = result.errors.length ? escapeHtml(result.errors.join("; ")) : "no match";
    row.innerHTML = queryCell + `<td colspan="3" class="no-match">${note}</td>`;
    return;
  }
  const values = result.matches.map((m) => `<span class="value">${escapeHtml(m.value)}</span>`).join(", ");
  const confidence = result.matches[0].confidence.toFixed(2);
  row.innerHTML =
    queryCell +
    `<td class="values">${values}</td>` +
    `<td>${stageBadge(result.matches[0].stage)}</td>` +
    `<td class="confidence">${confidence}</td>`;
}

async function loadInlineText(text: string): Promise<void> {
  session.docId = null;
  session.inlineText = text;
  try {
    session.extracted = await extractText({ text });
    hideBanner();
  } catch (err) {
    const { message, serviceDown } = describeError(err);
    showBanner(message, serviceDown ? () => void loadInlineText(text) : null);
    return;
  }
  renderPreview(null);
}

async function uploadAndExtract(file: File): Promise<void> {
  try {
    const uploaded = await uploadDocument(file);
    session.docId = uploaded.doc_id;
    session.inlineText = null;
    session.extracted = await extractText({ doc_id: uploaded.doc_id });
    hideBanner();
  } catch (err) {
    const { message, serviceDown } = describeError(err);
    showBanner(message, serviceDown ? () => void uploadAndExtract(file) : null);
    return;
  }
  renderPreview(null);
}

async function queryField(raw: string): Promise<void> {
  const input = el<HTMLInputElement>("query-input");
  if (!raw.trim()) {
    input.classList.add("invalid");
    return;
  }
  input.classList.remove("invalid");
  if (!session.extracted) {
    showBanner("Load a document or paste text before querying.", null);
    return;
  }
  const entry: HistoryEntry = { raw, result: null, error: null };
  session.history.push(entry);
  const tbody = el<HTMLTableSectionElement>("results-body");
  const row = tbody.insertRow();
  renderRow(row, entry);
  const target = session.docId ? { doc_id: session.docId } : { text: session.inlineText ?? "" };
  try {
    const results = await retrieveFields(target, [raw]);
    entry.result = results[0];
    hideBanner();
  } catch (err) {
    const { message, serviceDown } = describeError(err);
    if (serviceDown) {
      entry.error = "service unreachable";
      showBanner(message, () => {
        void queryField(raw);
      });
    } else {
      entry.error = message;
    }
  }
  // Rows update in place, so out-of-order completions land correctly.
  renderRow(row, entry);
  const withSpan = entry.result?.matches.find((m) => m.span);
  renderPreview(withSpan?.span ?? null);
}

export function boot(): void {
  const suggestions = el<HTMLDataListElement>("field-suggestions");
  suggestions.innerHTML = FIELD_SUGGESTIONS.map((f) => `<option value="${f}"></option>`).join("");

  el<HTMLButtonElement>("load-text-btn").addEventListener("click", () => {
    const text = el<HTMLTextAreaElement>("paste-input").value;
    if (text.trim()) {
      void loadInlineText(text);
    }
  });

  el<HTMLInputElement>("file-input").addEventListener("change", (event) => {
    const files = (event.target as HTMLInputElement).files;
    if (files && files.length) {
      void uploadAndExtract(files[0]);
    }
  });

  el<HTMLButtonElement>("query-btn").addEventListener("click", () => {
    void queryField(el<HTMLInputElement>("query-input").value);
  });
  el<HTMLInputElement>("query-input").addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") {
      void queryField(el<HTMLInputElement>("query-input").value);
    }
  });

  el<HTMLButtonElement>("banner-retry").addEventListener("click", () => {
    const action = retryAction;
    hideBanner();
    if (action) {
      action();
    }
  });
  el<HTMLButtonElement>("banner-dismiss").addEventListener("click", hideBanner);

  renderPreview(null);
  void health().catch(() => {
    showBanner("Service unreachable. Is the extraction service running?", () => boot());
  });
}

// Exposed for tests that need to drive the app programmatically.
export const testables = { loadInlineText, uploadAndExtract, queryField };
