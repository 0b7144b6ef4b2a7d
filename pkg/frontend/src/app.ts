import { ApiClient, ApiError } from "./api.js";
import { renderSweepStack } from "./grid.js";
import { renderHistory } from "./history.js";
import { JobPoller } from "./poll.js";
import { renderRecommendation, VerdictForm } from "./verdict.js";
import type { NextAction, SessionView } from "./types.js";

const api = new ApiClient();
const poller = new JobPoller((jobId) => api.getJob(jobId));

function mount(): HTMLElement {
  return document.getElementById("app") as HTMLElement;
}

function navigate(hash: string): void {
  window.location.hash = hash;
}

async function route(): Promise<void> {
  poller.stop();
  const hash = window.location.hash;
  const match = hash.match(/^#\/session\/(.+)$/);
  if (match) {
    await showSession(match[1]);
  } else {
    await showSessionList();
  }
}

// ------------------------------------------------------------ session list

async function showSessionList(): Promise<void> {
  const root = mount();
  root.replaceChildren();

  const heading = document.createElement("h1");
  heading.textContent = "forgedit sessions";
  root.appendChild(heading);

  const form = document.createElement("form");
  form.className = "create-form";
  form.innerHTML = `
    <h2>New session</h2>
    <label>Image (PNG) <input type="file" name="image" accept="image/png" required></label>
    <label>Target prompt <input type="text" name="target" required placeholder="A polar bear raising its hand"></label>
    <label>Source prompt (optional) <input type="text" name="source" placeholder="leave empty to auto-caption"></label>
    <button type="submit">Create</button>
    <p class="form-error" hidden></p>`;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const errorBox = form.querySelector<HTMLElement>(".form-error")!;
    errorBox.hidden = true;
    const image = form.querySelector<HTMLInputElement>("input[name=image]")!.files?.[0];
    const target = form.querySelector<HTMLInputElement>("input[name=target]")!.value.trim();
    const source = form.querySelector<HTMLInputElement>("input[name=source]")!.value.trim();
    if (!image || !target) return;
    try {
      const session = await api.createSession(image, target, source || undefined);
      navigate(`#/session/${session.id}`);
    } catch (error) {
      errorBox.hidden = false;
      errorBox.textContent = error instanceof ApiError ? `(${error.status}) ${error.message}` : String(error);
    }
  });
  root.appendChild(form);

  const listBox = document.createElement("section");
  listBox.className = "session-list";
  try {
    const sessions = await api.listSessions();
    if (sessions.length === 0) {
      listBox.textContent = "No sessions yet.";
    } else {
      const table = document.createElement("table");
      table.innerHTML = "<tr><th>id</th><th>target</th><th>state</th><th>sweeps</th></tr>";
      for (const summary of sessions) {
        const row = document.createElement("tr");
        const link = `<a href="#/session/${summary.id}">${summary.id}</a>`;
        row.innerHTML = `<td>${link}</td><td></td><td>${summary.state}</td><td>${summary.sweep_count}</td>`;
        row.children[1].textContent = summary.target_prompt;
        table.appendChild(row);
      }
      listBox.appendChild(table);
    }
  } catch (error) {
    listBox.textContent = `cannot load sessions: ${String(error)}`;
  }
  root.appendChild(listBox);
}

// ---------------------------------------------------------- session detail

async function showSession(sessionId: string): Promise<void> {
  const root = mount();
  let session: SessionView;
  try {
    session = await api.getSession(sessionId);
  } catch (error) {
    root.replaceChildren();
    const message = document.createElement("p");
    message.className = "form-error";
    message.textContent = error instanceof ApiError ? `(${error.status}) ${error.message}` : String(error);
    root.appendChild(message);
    return;
  }
  renderSession(session);
  const job = session.active_job;
  if (job && (job.state === "queued" || job.state === "running")) {
    watchJob(job.job_id, sessionId);
  }
}

function watchJob(jobId: string, sessionId: string): void {
  poller.start(
    jobId,
    (status) => {
      const bar = document.querySelector<HTMLElement>(".job-progress");
      if (bar) bar.textContent = `${status.kind}: ${status.message} (${Math.round(status.progress * 100)}%)`;
    },
    () => void showSession(sessionId),
  );
}

function renderSession(session: SessionView): void {
  const root = mount();
  root.replaceChildren();

  const back = document.createElement("a");
  back.href = "#/";
  back.textContent = "← sessions";
  root.appendChild(back);

  const heading = document.createElement("h1");
  heading.textContent = `session ${session.id}`;
  root.appendChild(heading);

  const meta = document.createElement("dl");
  meta.className = "session-meta";
  meta.innerHTML = `
    <dt>state</dt><dd class="state-badge"></dd>
    <dt>source prompt</dt><dd class="meta-source"></dd>
    <dt>target prompt</dt><dd class="meta-target"></dd>`;
  meta.querySelector(".state-badge")!.textContent = session.state.value;
  meta.querySelector(".meta-source")!.textContent =
    `${session.source_prompt.text} (${session.source_prompt.origin})`;
  meta.querySelector(".meta-target")!.textContent = session.target_prompt.text;
  root.appendChild(meta);

  const progress = document.createElement("p");
  progress.className = "job-progress";
  root.appendChild(progress);

  const runRecommended = async (action: NextAction) => {
    poller.pause();
    try {
      const { job_id } = await api.postSweep(session.id, action);
      poller.resume();
      watchJob(job_id, session.id);
    } catch (error) {
      poller.resume();
      progress.textContent = String(error);
    }
  };

  let form: VerdictForm | null = null;
  if (session.state.value === "AwaitingVerdict") {
    form = new VerdictForm({
      submit: async (verdict) => {
        poller.pause(); // submissions never interleave with background polls
        try {
          return await api.postVerdict(session.id, verdict);
        } finally {
          poller.resume();
        }
      },
      runRecommended,
      onDone: () => void showSession(session.id),
    });
  }

  const stack = renderSweepStack(session.sweeps, {
    imageUrl: (id) => api.imageUrl(id),
    onSelect: (sweepId, index) => form?.selectTile(sweepId, index),
  });
  root.appendChild(stack);

  if (form) {
    root.appendChild(form.element);
  } else if (session.final_choice) {
    const done = document.createElement("p");
    done.className = "final-choice";
    done.textContent =
      `Done: image ${session.final_choice.image_index} of ${session.final_choice.sweep_id}`;
    root.appendChild(done);
  }

  if (session.state.last_recommendation && session.state.value === "AwaitingVerdict") {
    root.appendChild(renderRecommendation(session.state.last_recommendation, (a) => void runRecommended(a)));
  }

  root.appendChild(renderHistory(session));
}

window.addEventListener("hashchange", () => void route());
window.addEventListener("DOMContentLoaded", () => void route());
