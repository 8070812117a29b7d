/** End-to-end human loop against the real session service.
 *
 * Spawns the Python service, then drives the actual UI code in a DOM:
 * creates a 2-iteration session, answers one ordinal label and one coactive
 * slider suggestion (iteration 1) plus one pairwise comparison
 * (iteration 2), advances through the finish, and checks the rendered
 * posterior heatmap and the persisted transcript.  Any non-2xx response
 * makes the client throw and fails the test.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";

const PORT = 8771;
const BASE = `http://127.0.0.1:${PORT}`;
const SEED = 1; // iteration-2 Thompson draw differs from iteration 1's action

let service: ChildProcess;

async function waitFor<T>(probe: () => T | null | undefined | Promise<T | null | undefined>,
                          what: string, timeoutMs = 30_000): Promise<T> {
  const t0 = Date.now();
  for (;;) {
    try {
      const value = await probe();
      if (value !== null && value !== undefined && value !== false as unknown) return value;
    } catch {
      /* not ready yet */
    }
    if (Date.now() - t0 > timeoutMs) throw new Error(`timed out waiting for ${what}`);
    await new Promise(r => setTimeout(r, 100));
  }
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "polard-e2e-"));
  service = spawn("python3", ["-c", [
    "import uvicorn",
    "from polard.service import create_app",
    `uvicorn.run(create_app(data_dir=${JSON.stringify(dataDir)}),` +
    ` host='127.0.0.1', port=${PORT}, log_level='warning')`,
  ].join("; ")], { stdio: "inherit" });
  await waitFor(async () => {
    const resp = await fetch(`${BASE}/healthz`);
    return resp.ok ? true : null;
  }, "service healthz");
});

afterAll(() => {
  service?.kill();
});

function q<T extends Element>(root: HTMLElement, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node as T;
}

describe("live two-iteration session", () => {
  it("runs the full loop and renders the posterior heatmap", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const api = new ApiClient(BASE);
    let hash = "";
    const app = new App(root, api, (h) => { hash = h; });
    app.renderSetup();

    // configure: 2 dimensions (defaults 0..1 step 0.25), 2 iterations, seed
    (q<HTMLInputElement>(root, 'input[name="iterations"]')).value = "2";
    (q<HTMLInputElement>(root, 'input[name="seed"]')).value = String(SEED);
    q<HTMLFormElement>(root, "#setup-form").dispatchEvent(new Event("submit"));
    await waitFor(() => root.querySelector("#submit-feedback"), "first query screen");
    expect(hash).toMatch(/^#\/s\//);
    const sessionId = app.sessionId as string;

    // iteration 1: no comparison yet (empty buffer); answer ordinal "Bad"
    // and offer a one-step coactive slider suggestion
    expect(root.querySelectorAll(".comparison")).toHaveLength(0);
    const firstAction = Number(q(root, ".ordinal .action-card").getAttribute("data-action"));
    q<HTMLButtonElement>(root, '.ordinal-btn[data-label="2"]').click();
    const enable = q<HTMLInputElement>(root, ".coactive-enable");
    enable.checked = true;
    const slider = q<HTMLInputElement>(root, ".coactive-slider");
    const original = Number(slider.value);
    const suggested = original < 1.0 ? original + 0.25 : original - 0.25;
    slider.value = String(suggested);
    q<HTMLButtonElement>(root, "#submit-feedback").click();
    await waitFor(() => root.querySelector(".comparison"), "second query screen");

    // iteration 2: exactly one comparison (new action vs buffer); prefer A,
    // skip the ordinal and coactive prompts
    expect(root.querySelectorAll(".comparison")).toHaveLength(1);
    const pair = q(root, ".comparison").getAttribute("data-pair")!.split(",").map(Number);
    const preferA = q<HTMLInputElement>(root, '.comparison input[type="radio"]');
    preferA.checked = true;
    preferA.dispatchEvent(new Event("change"));
    q<HTMLButtonElement>(root, "#submit-feedback").click();
    await waitFor(() => root.querySelector(".finished"), "finished session view");

    // posterior heatmap rendered from the service projection payload
    const cells = root.querySelectorAll(".heatmap .heat-cell");
    expect(cells.length).toBe(25); // 5x5 projection of the 2-D grid
    const values = Array.from(cells)
      .map(c => c.getAttribute("data-value"))
      .filter((v): v is string => v !== null && v !== "")
      .map(Number);
    expect(values.length).toBeGreaterThan(0);
    for (const v of values) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
    expect(root.querySelectorAll(".heat-cell.sampled").length).toBeGreaterThan(0);

    // the transcript contains exactly the submitted feedback
    const history = await api.getHistory(sessionId);
    const records = history.events
      .filter(e => e.event === "feedback_recorded")
      .flatMap(e => e.records as Record<string, unknown>[]);
    const nonSkip = records.filter(r => r.type !== "skip");
    expect(nonSkip).toHaveLength(3);
    const ordinalRec = nonSkip.find(r => r.type === "ordinal")!;
    expect(ordinalRec.action).toBe(firstAction);
    expect(ordinalRec.label).toBe(2);
    const coactiveRec = nonSkip.find(r => r.type === "coactive")!;
    expect(coactiveRec.original).toBe(firstAction);
    expect(coactiveRec.suggested).not.toBe(firstAction);
    const prefRec = nonSkip.find(r => r.type === "preference")!;
    expect(prefRec.winner).toBe(pair[0]);
    expect([prefRec.winner, prefRec.loser].sort()).toEqual([...pair].sort());
  });

  it("resumes a session from the id in the URL", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const api = new ApiClient(BASE);
    const created = await api.createSession({
      space: { dimensions: [
        { name: "p1", min: 0, max: 1, step: 0.25 },
        { name: "p2", min: 0, max: 1, step: 0.25 },
      ]},
      sampler: { mode: "regret_min", n: 1, b: 1, use_subset: true, rng_seed: 3 },
      kernel: {},
      noise: { c_p: 0.1, c_c: 0.15, c_o: 0.3 },
      ordinal: { num_categories: 4 },
      iterations: 3,
      feedback_types: ["preference", "ordinal"],
      source: "human",
    });
    location.hash = `#/s/${created.id}`;
    const app = new App(root, api);
    await app.start();
    expect(app.sessionId).toBe(created.id);
    await waitFor(() => root.querySelector("#query-screen"), "resumed query screen");
    expect(root.textContent).toContain(`Session ${created.id}`);
  });

  it("surfaces validation errors inline on the setup form", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const app = new App(root, new ApiClient(BASE));
    app.renderSetup();
    (q<HTMLInputElement>(root, 'input[name="c_p"]')).value = "0";
    q<HTMLFormElement>(root, "#setup-form").dispatchEvent(new Event("submit"));
    await waitFor(() => {
      const text = q(root, "#setup-error").textContent;
      return text && text.includes("noise.c_p") ? true : null;
    }, "inline validation error");
  });
});
