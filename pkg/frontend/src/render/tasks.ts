/** Task organization panels: browsable list, description, and the
 * viewer's participating-task details (roles, addresses, states,
 * contributed point counts).
 */

import type { TaskRecord } from "../types.js";
import { clear, el } from "./common.js";

export interface TaskPanelCallbacks {
  onSelect(taskId: string): void;
  onJoin(taskId: string): void;
}

export function renderTaskList(
  container: HTMLElement,
  tasks: TaskRecord[],
  viewer: string,
  activeTaskId: string | null,
  callbacks: TaskPanelCallbacks,
): void {
  clear(container);
  if (tasks.length === 0) {
    container.appendChild(el("p", "empty-note", "no tasks proposed yet"));
    return;
  }
  const table = el("table", "task-table");
  const head = el("tr");
  for (const title of ["task", "state", "participants", ""]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const task of tasks) {
    const row = el("tr", task.task_id === activeTaskId ? "task-row active" : "task-row");
    row.appendChild(el("td", "task-title", task.title || task.task_id.slice(0, 8)));
    row.appendChild(el("td", `task-state state-${task.state.toLowerCase()}`,
                       task.state_label));
    const joined = Object.values(task.roster)
      .filter((entry) => entry.state !== "invited").length;
    row.appendChild(el("td", undefined, `${joined}/${Object.keys(task.roster).length}`));
    const actions = el("td");
    const mine = task.roster[viewer];
    if (mine && mine.state === "invited" && task.state === "Preparing") {
      const button = el("button", "join-button", "join");
      button.addEventListener("click", (event) => {
        event.stopPropagation();
        callbacks.onJoin(task.task_id);
      });
      actions.appendChild(button);
    }
    row.appendChild(actions);
    row.addEventListener("click", () => callbacks.onSelect(task.task_id));
    table.appendChild(row);
  }
  container.appendChild(table);
}

export function renderTaskDescription(container: HTMLElement, task: TaskRecord | null): void {
  clear(container);
  if (!task) {
    container.appendChild(el("p", "empty-note", "select a task"));
    return;
  }
  container.appendChild(el("h3", undefined, task.title || task.task_id));
  container.appendChild(el("p", undefined, task.description || "(no description)"));
  const dl = el("dl", "task-facts");
  const facts: [string, string][] = [
    ["state", task.state_label],
    ["mode", task.config.visualization_mode],
    ["dimensions", String(task.config.dimensions)],
    ["perplexity", String(task.config.perplexity)],
    ["proposer", task.proposer || "-"],
  ];
  for (const [key, value] of facts) {
    dl.appendChild(el("dt", undefined, key));
    dl.appendChild(el("dd", undefined, value));
  }
  container.appendChild(dl);
}

/** "My Participating Task" tab: every party's role, address, state, and
 * contributed count. */
export function renderMyTask(container: HTMLElement, task: TaskRecord | null,
                             viewer: string): void {
  clear(container);
  if (!task || !task.roster[viewer]) {
    container.appendChild(el("p", "empty-note", "not participating in this task"));
    return;
  }
  const table = el("table", "roster-table");
  const head = el("tr");
  for (const title of ["party", "role", "address", "state", "points"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const [role, endpoint] of Object.entries(task.collaborators)) {
    const row = el("tr");
    row.appendChild(el("td", undefined, role === "S" ? "key holder" : "compute holder"));
    row.appendChild(el("td", undefined, `collaborator ${role}`));
    row.appendChild(el("td", undefined, endpoint));
    row.appendChild(el("td", undefined, task.state_label));
    row.appendChild(el("td", undefined, "-"));
    table.appendChild(row);
  }
  for (const entry of Object.values(task.roster)) {
    const row = el("tr", entry.participant_id === viewer ? "roster-self" : undefined);
    row.appendChild(el("td", undefined, entry.participant_id));
    row.appendChild(el("td", undefined, "participant"));
    const endpoint = typeof entry.endpoint === "object" && entry.endpoint
      ? entry.endpoint.frames ?? "-" : entry.endpoint ?? "-";
    row.appendChild(el("td", undefined, String(endpoint)));
    row.appendChild(el("td", undefined, entry.state));
    row.appendChild(el("td", undefined, String(entry.expected_points)));
    table.appendChild(row);
  }
  container.appendChild(table);
}
