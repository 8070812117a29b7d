import { el, fmt } from "./dom.js";
import type { DimensionSpec, SessionConfigDocument } from "./types.js";

const DEFAULT_CATEGORIES = ["Very Bad", "Bad", "Neutral", "Good"];

export interface SetupResult {
  config: SessionConfigDocument;
  seed?: number;
}

interface DimensionRow {
  root: HTMLElement;
  name: HTMLInputElement;
  min: HTMLInputElement;
  max: HTMLInputElement;
  step: HTMLInputElement;
}

function numberInput(name: string, value: string, step = "any"): HTMLInputElement {
  return el("input", { type: "number", name, value, step });
}

function dimensionRow(index: number): DimensionRow {
  const name = el("input", { type: "text", name: `dim-name-${index}`, value: `p${index + 1}` });
  const min = numberInput(`dim-min-${index}`, "0");
  const max = numberInput(`dim-max-${index}`, "1");
  const step = numberInput(`dim-step-${index}`, "0.25");
  const root = el("div", { class: "dim-row" }, [
    el("label", {}, ["name ", name]),
    el("label", {}, ["min ", min]),
    el("label", {}, ["max ", max]),
    el("label", {}, ["step ", step]),
  ]);
  return { root, name, min, max, step };
}

/** Session-creation form. Calls `onCreate` with the assembled config
 * document; all validation happens server-side and failures are surfaced
 * inline through `showError`. */
export function renderSetupScreen(root: HTMLElement,
                                  onCreate: (result: SetupResult) => void): void {
  const rows: DimensionRow[] = [dimensionRow(0), dimensionRow(1)];
  const dimsBox = el("div", { id: "dimensions" }, rows.map(r => r.root));
  const addDim = el("button", { type: "button", id: "add-dimension" }, ["Add dimension"]);
  addDim.addEventListener("click", () => {
    const row = dimensionRow(rows.length);
    rows.push(row);
    dimsBox.append(row.root);
  });

  const mode = el("select", { name: "mode", id: "mode" }, [
    el("option", { value: "regret_min" }, ["Optimize (regret minimization)"]),
    el("option", { value: "active_learning" }, ["Characterize (information gain)"]),
    el("option", { value: "random" }, ["Random (baseline)"]),
  ]);
  const n = numberInput("n", "1", "1");
  const b = numberInput("b", "1", "1");
  const iterations = numberInput("iterations", "10", "1");
  const R = numberInput("R", "100", "1");
  const lambda = numberInput("roi_lambda", "0.45");
  const bRoi = numberInput("b_roi", "-1");
  const cP = numberInput("c_p", "0.1");
  const cC = numberInput("c_c", "0.15");
  const cO = numberInput("c_o", "0.3");
  const seed = numberInput("seed", "0", "1");
  const categories = el("input", {
    type: "text", name: "categories", id: "categories",
    value: DEFAULT_CATEGORIES.join(", "),
  });
  const typeBoxes = ["preference", "coactive", "ordinal"].map(t =>
    el("input", { type: "checkbox", name: `type-${t}`, value: t, checked: "" }));

  const error = el("div", { class: "error", id: "setup-error" });
  const submit = el("button", { type: "submit", id: "create-session" }, ["Start session"]);

  const form = el("form", { id: "setup-form" }, [
    el("h2", {}, ["New session"]),
    el("fieldset", {}, [el("legend", {}, ["Parameters"]), dimsBox, addDim]),
    el("fieldset", {}, [
      el("legend", {}, ["Strategy"]),
      el("label", {}, ["mode ", mode]),
      el("label", {}, ["samples per iteration (n) ", n]),
      el("label", {}, ["buffer size (b) ", b]),
      el("label", {}, ["iterations ", iterations]),
      el("label", {}, ["random subset size (R) ", R]),
      el("label", {}, ["ROI optimism (lambda) ", lambda]),
      el("label", {}, ["ROI threshold ", bRoi]),
    ]),
    el("fieldset", {}, [
      el("legend", {}, ["Feedback"]),
      el("label", {}, [typeBoxes[0], " pairwise preferences"]),
      el("label", {}, [typeBoxes[1], " coactive suggestions"]),
      el("label", {}, [typeBoxes[2], " ordinal labels"]),
      el("label", {}, ["category names ", categories]),
      el("label", {}, ["preference noise (c_p) ", cP]),
      el("label", {}, ["suggestion noise (c_c) ", cC]),
      el("label", {}, ["label noise (c_o) ", cO]),
      el("label", {}, ["seed ", seed]),
    ]),
    error,
    submit,
  ]);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const dimensions: DimensionSpec[] = rows.map(r => ({
      name: r.name.value,
      min: Number(r.min.value),
      max: Number(r.max.value),
      step: Number(r.step.value),
    }));
    const names = categories.value.split(",").map(s => s.trim()).filter(Boolean);
    const config: SessionConfigDocument = {
      space: { dimensions },
      sampler: {
        mode: mode.value,
        n: Number(n.value),
        b: Number(b.value),
        R: Number(R.value),
        roi_lambda: Number(lambda.value),
        b_roi: Number(bRoi.value),
        use_subset: true,
        rng_seed: Number(seed.value),
      },
      kernel: {},
      noise: { c_p: Number(cP.value), c_c: Number(cC.value), c_o: Number(cO.value) },
      ordinal: { num_categories: names.length >= 2 ? names.length : 4, names: names.length >= 2 ? names : DEFAULT_CATEGORIES },
      iterations: Number(iterations.value),
      feedback_types: typeBoxes.filter(box => box.checked).map(box => box.value),
      source: "human",
    };
    onCreate({ config, seed: Number(seed.value) });
  });

  root.append(form);
}

export function showSetupError(message: string): void {
  const box = document.getElementById("setup-error");
  if (box) box.textContent = message;
}

export { fmt };
