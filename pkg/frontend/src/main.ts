// DOM wiring. All state lives in the form controls and the last rendered
// report; nothing is persisted (no cookies, no storage), and nothing is
// sent until the user presses a button.

import { fetchDbInfo, submitQuery, type QueryParams, type QueryResult } from "./api.js";
import { copyToClipboard } from "./clipboard.js";
import {
  renderBanner,
  renderDbInfo,
  renderReport,
  renderSplitReport,
  type PartResult,
} from "./render.js";
import { canSplit, shuffled, splitQueryHelper } from "./split.js";
import { destinationLooksValid, parseSuspectsField } from "./suspects.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const suspectsField = el<HTMLTextAreaElement>("suspects");
const destinationField = el<HTMLInputElement>("destination");
const includeInconclusive = el<HTMLInputElement>("include-inconclusive");
const shuffleToggle = el<HTMLInputElement>("shuffle");
const partsField = el<HTMLInputElement>("parts");
const submitButton = el<HTMLButtonElement>("submit");
const runPartsButton = el<HTMLButtonElement>("run-parts");
const suspectsErrors = el<HTMLParagraphElement>("suspects-errors");
const bannerArea = el<HTMLDivElement>("banner-area");
const reportArea = el<HTMLDivElement>("report-area");
const dbInfoArea = el<HTMLElement>("db-info");

let inFlight = false;

function refreshControls(): void {
  const parsed = parseSuspectsField(suspectsField.value);
  const destinationOk = destinationLooksValid(destinationField.value);
  suspectsErrors.textContent = parsed.tokens
    .filter((t) => t.error !== null)
    .map((t) => t.error)
    .join("; ");
  submitButton.disabled = inFlight || !parsed.valid || !destinationOk;
  const parts = Number(partsField.value);
  runPartsButton.disabled =
    submitButton.disabled || !canSplit(parsed.submission.length, parts);
}

function currentParams(suspectAsns: number[]): QueryParams {
  return {
    suspectAsns: shuffleToggle.checked ? shuffled(suspectAsns) : suspectAsns,
    destination: destinationField.value.trim(),
    includeInconclusive: includeInconclusive.checked,
  };
}

function showResult(html: string): void {
  bannerArea.innerHTML = "";
  reportArea.innerHTML = html;
}

function showBanner(result: Extract<QueryResult, { ok: false }>): void {
  // non-blocking: the report from the previous query stays visible
  bannerArea.innerHTML = renderBanner(result.code, result.message);
}

async function runSingle(): Promise<void> {
  const parsed = parseSuspectsField(suspectsField.value);
  inFlight = true;
  refreshControls();
  try {
    const result = await submitQuery(currentParams(parsed.submission));
    if (result.ok) {
      showResult(renderReport(result.response));
    } else {
      showBanner(result);
    }
  } finally {
    inFlight = false;
    refreshControls();
  }
}

async function runParts(): Promise<void> {
  const parsed = parseSuspectsField(suspectsField.value);
  const parts = splitQueryHelper(parsed.submission, Number(partsField.value));
  inFlight = true;
  refreshControls();
  try {
    const results: PartResult[] = [];
    for (const suspects of parts) {
      const result = await submitQuery(currentParams(suspects));
      if (!result.ok) {
        showBanner(result);
        return;
      }
      results.push({ suspects, response: result.response });
    }
    showResult(renderSplitReport(results));
  } finally {
    inFlight = false;
    refreshControls();
  }
}

submitButton.addEventListener("click", () => void runSingle());
runPartsButton.addEventListener("click", () => void runParts());
for (const field of [suspectsField, destinationField, partsField]) {
  field.addEventListener("input", refreshControls);
}

reportArea.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const copyId = target.dataset["copyTarget"];
  if (!copyId) return;
  const source = document.getElementById(copyId);
  if (source?.textContent) {
    void copyToClipboard(source.textContent).then((done) => {
      target.textContent = done ? "copied" : "copy failed";
    });
  }
});

refreshControls();
void fetchDbInfo().then((info) => {
  dbInfoArea.innerHTML = renderDbInfo(info);
});
