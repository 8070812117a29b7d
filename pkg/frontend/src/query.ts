import { el, fmt } from "./dom.js";
import type {
  ActionView,
  DimensionSpec,
  FeedbackBody,
  QueryPayload,
  SessionStatePayload,
} from "./types.js";

function actionCard(action: ActionView, dimensions: DimensionSpec[], label: string): HTMLElement {
  return el("div", { class: "action-card", "data-action": String(action.index) }, [
    el("h4", {}, [label]),
    el("table", {}, dimensions.map((dim, i) =>
      el("tr", {}, [
        el("td", {}, [dim.name || `dim${i}`]),
        el("td", { class: "coord" }, [fmt(action.coords[i])]),
      ]))),
  ]);
}

interface ComparisonControl {
  pair: [number, number];
  winner: () => number | null;
}

interface CoactiveControl {
  action: number;
  suggestion: () => number[] | null;
}

interface OrdinalControl {
  action: number;
  label: () => number | null;
}

/** Feedback screen: one comparison block per pair, ordinal buttons and
 * grid-stepped coactive sliders per newly sampled action. `onSubmit`
 * receives the assembled feedback body. */
export function renderQueryScreen(root: HTMLElement, state: SessionStatePayload,
                                  query: QueryPayload,
                                  onSubmit: (body: FeedbackBody) => void): void {
  const dims = state.dimensions;
  const comparisons: ComparisonControl[] = [];
  const coactive: CoactiveControl[] = [];
  const ordinal: OrdinalControl[] = [];

  const header = el("div", { class: "progress" }, [
    `Iteration ${state.iteration} of ${state.total_iterations}`,
  ]);
  const body = el("div", { id: "query-screen" }, [header]);

  query.comparisons.forEach((comp, k) => {
    let winner: number | null = null;
    const group = `comparison-${k}`;
    const make = (value: number | null, text: string) => {
      const input = el("input", { type: "radio", name: group });
      input.addEventListener("change", () => { winner = value; });
      return el("label", { class: "choice" }, [input, ` ${text}`]);
    };
    body.append(el("div", { class: "comparison", "data-pair": comp.pair.join(",") }, [
      el("h3", {}, [`Which do you prefer?`]),
      el("div", { class: "cards" }, [
        actionCard(comp.actions[0], dims, "Option A"),
        actionCard(comp.actions[1], dims, "Option B"),
      ]),
      make(comp.pair[0], "Prefer A"),
      make(comp.pair[1], "Prefer B"),
      make(null, "No preference"),
    ]));
    comparisons.push({ pair: comp.pair, winner: () => winner });
  });

  for (const prompt of query.ordinal_prompts) {
    let picked: number | null = null;
    const buttons = query.ordinal_categories.map((name, i) => {
      const btn = el("button", {
        type: "button", class: "ordinal-btn",
        "data-action": String(prompt.index), "data-label": String(i + 1),
        title: name,
      }, [name]);
      btn.addEventListener("click", () => {
        picked = i + 1;
        buttons.forEach(b => b.classList.remove("selected"));
        btn.classList.add("selected");
      });
      return btn;
    });
    body.append(el("div", { class: "ordinal" }, [
      el("h3", {}, ["How would you rate this action?"]),
      actionCard(prompt, dims, `Action ${prompt.index}`),
      el("div", { class: "ordinal-buttons" }, buttons),
    ]));
    ordinal.push({ action: prompt.index, label: () => picked });
  }

  for (const prompt of query.coactive_prompts) {
    const enable = el("input", { type: "checkbox", class: "coactive-enable" });
    const sliders = dims.map((dim, i) =>
      el("input", {
        type: "range", class: "coactive-slider",
        name: `coactive-${prompt.index}-${i}`,
        min: String(dim.min), max: String(dim.max), step: String(dim.step),
        value: String(prompt.coords[i]),
      }));
    body.append(el("div", { class: "coactive" }, [
      el("h3", {}, ["Suggest an improvement (optional)"]),
      el("label", {}, [enable, " I have a suggestion"]),
      ...dims.map((dim, i) => el("label", { class: "slider-row" }, [
        dim.name || `dim${i}`, " ", sliders[i],
      ])),
    ]));
    coactive.push({
      action: prompt.index,
      suggestion: () => enable.checked ? sliders.map(s => Number(s.value)) : null,
    });
  }

  const submit = el("button", { type: "button", id: "submit-feedback" }, ["Submit feedback"]);
  submit.addEventListener("click", () => {
    onSubmit({
      comparisons: comparisons.map(c => ({ pair: c.pair, winner: c.winner() })),
      coactive: coactive.map(c => ({ action: c.action, suggestion: c.suggestion() })),
      ordinal: ordinal.map(o => ({ action: o.action, label: o.label() })),
    });
  });
  body.append(submit);
  root.append(body);
}
