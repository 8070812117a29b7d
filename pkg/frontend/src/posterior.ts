import { el, fmt } from "./dom.js";
import type { PosteriorPayload, ProjectionPayload, SessionStatePayload } from "./types.js";

/** Heat color for a normalized value in [0, 1]: linear blue-to-red ramp.
 * Pure display mapping of the service's already-normalized payload. */
export function heatColor(value: number): string {
  const r = Math.round(255 * value);
  const b = Math.round(255 * (1 - value));
  const g = Math.round(80 * (1 - Math.abs(2 * value - 1)));
  return `rgb(${r},${g},${b})`;
}

function nearestIndex(values: number[], coord: number): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (Math.abs(values[i] - coord) < Math.abs(values[best] - coord)) best = i;
  }
  return best;
}

function projectionTable(projection: ProjectionPayload,
                         posterior: PosteriorPayload): HTMLElement {
  const [di, dj] = projection.dims;
  const marks = new Set(posterior.visited.map(a =>
    `${nearestIndex(projection.row_values, a.coords[di])}:` +
    `${nearestIndex(projection.col_values, a.coords[dj])}`));
  const rows = projection.values.map((row, r) =>
    el("tr", {}, row.map((value, c) => {
      const cell = el("td", {
        class: "heat-cell" + (marks.has(`${r}:${c}`) ? " sampled" : ""),
        "data-value": value === null ? "" : String(value),
      });
      if (value !== null) {
        cell.style.backgroundColor = heatColor(value);
        cell.title = fmt(value);
      } else {
        cell.classList.add("empty");
      }
      return cell;
    })));
  return el("div", { class: "projection" }, [
    el("h4", {}, [`${projection.dim_names[0]} vs ${projection.dim_names[1]}`]),
    el("table", { class: "heatmap" }, rows),
  ]);
}

/** Posterior panel: one heatmap per dimension pair (mean averaged over the
 * remaining dimensions, normalized server-side), sampled-action markers and
 * the current optimum badge. */
export function renderPosteriorScreen(root: HTMLElement, state: SessionStatePayload,
                                      posterior: PosteriorPayload | null): void {
  const box = el("div", { id: "posterior-screen" }, [el("h2", {}, ["Learned preferences"])]);
  if (posterior === null) {
    box.append(el("p", { class: "empty-state" },
      ["No posterior yet - answer the first queries to see the landscape."]));
    root.append(box);
    return;
  }
  if (posterior.optimum_estimate) {
    box.append(el("div", { class: "optimum-badge", id: "optimum" }, [
      "Current best: ",
      posterior.optimum_estimate.coords.map(c => fmt(c)).join(", "),
    ]));
  }
  box.append(el("div", { class: "stats" }, [
    `${state.visited_count} actions sampled, ` +
    `${state.counts.preferences} preferences / ${state.counts.coactive} suggestions / ` +
    `${state.counts.ordinal} labels collected`,
  ]));
  if (posterior.projections.length === 0) {
    // 1-D space: render the posterior mean per action as a single-row strip
    const order = posterior.subset.map((_, i) => i);
    const lo = Math.min(...posterior.mean);
    const hi = Math.max(...posterior.mean);
    const row = el("tr", {}, order.map(i => {
      const norm = hi > lo ? (posterior.mean[i] - lo) / (hi - lo) : 0.5;
      const cell = el("td", { class: "heat-cell", "data-value": String(norm) });
      cell.style.backgroundColor = heatColor(norm);
      cell.title = fmt(posterior.mean[i]);
      return cell;
    }));
    box.append(el("table", { class: "heatmap" }, [row]));
  } else {
    for (const projection of posterior.projections) {
      box.append(projectionTable(projection, posterior));
    }
  }
  root.append(box);
}
