import { ApiClient, ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import { renderPosteriorScreen } from "./posterior.js";
import { renderQueryScreen } from "./query.js";
import { renderSetupScreen, showSetupError } from "./setup.js";
import type { FeedbackBody, PosteriorPayload, SessionStatePayload } from "./types.js";

/** Single-session controller.
 *
 * State is never inferred client-side: every render follows a fresh fetch,
 * and after an advance one refetch is enough because advancing is
 * synchronous on the server.  The session id lives in the URL hash so a
 * reload resumes the same session.
 */
export class App {
  sessionId: string | null = null;

  constructor(private root: HTMLElement, private api: ApiClient,
              private onHashChange: (hash: string) => void = () => undefined) {}

  async start(): Promise<void> {
    const match = /#\/s\/([A-Za-z0-9]+)/.exec(this.currentHash());
    if (match) {
      this.sessionId = match[1];
      await this.renderSession();
    } else {
      this.renderSetup();
    }
  }

  currentHash(): string {
    return typeof location !== "undefined" ? location.hash : "";
  }

  private banner(message: string): void {
    const existing = document.getElementById("banner");
    if (existing) existing.remove();
    this.root.prepend(el("div", { class: "banner", id: "banner" }, [message]));
  }

  renderSetup(): void {
    clear(this.root);
    renderSetupScreen(this.root, async ({ config, seed }) => {
      try {
        const created = await this.api.createSession(config, seed);
        this.sessionId = created.id;
        this.onHashChange(`#/s/${created.id}`);
        await this.renderSession();
      } catch (err) {
        showSetupError(err instanceof ApiError ? err.detail : String(err));
      }
    });
  }

  async renderSession(): Promise<void> {
    if (!this.sessionId) return this.renderSetup();
    let state: SessionStatePayload;
    try {
      state = await this.api.getState(this.sessionId);
    } catch (err) {
      clear(this.root);
      this.banner(err instanceof ApiError ? err.detail : String(err));
      return;
    }
    let posterior: PosteriorPayload | null = null;
    try {
      posterior = await this.api.getPosterior(this.sessionId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) throw err;
    }

    clear(this.root);
    this.root.append(el("h1", {}, [`Session ${this.sessionId}`]));
    if (state.phase === "awaiting_feedback") {
      const query = await this.api.getQuery(this.sessionId);
      renderQueryScreen(this.root, state, query, (body) => this.submit(body));
    } else if (state.phase === "ready_to_advance") {
      const btn = el("button", { type: "button", id: "advance" }, ["Continue"]);
      btn.addEventListener("click", () => this.advance());
      this.root.append(btn);
    } else {
      this.root.append(el("p", { class: "finished" },
        [`Session finished after ${state.total_iterations} iterations.`]));
    }
    renderPosteriorScreen(this.root, state, posterior);
  }

  private async submit(body: FeedbackBody): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.postFeedback(this.sessionId, body);
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.renderSession();  // stale phase: refetch and re-render
      } else {
        this.banner(err instanceof ApiError ? err.detail : String(err));
      }
    }
  }

  private async advance(): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.advance(this.sessionId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        this.banner(err instanceof ApiError ? err.detail : String(err));
        return;
      }
    }
    await this.renderSession();
  }
}
