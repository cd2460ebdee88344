/** DOM wiring for the survey app. All survey logic lives in survey.ts;
 * this file only renders state and forwards events. */

import { SurveyApi } from "./api.js";
import { CATEGORIES, SCORE_KEYS, categoryById } from "./categories.js";
import { swipeTarget } from "./gestures.js";
import { Locale, makeTranslator } from "./i18n.js";
import { SurveyController } from "./survey.js";

const BACKEND_URL = (window as { SVIKIT_BACKEND?: string }).SVIKIT_BACKEND ?? "";
const COOKIE_NAME = "svikit_hash";

function readCookie(name: string): string | null {
  const hit = document.cookie.split("; ").find((part) => part.startsWith(name + "="));
  return hit ? decodeURIComponent(hit.split("=")[1]) : null;
}

function writeCookie(name: string, value: string): void {
  document.cookie = `${name}=${encodeURIComponent(value)}; max-age=${180 * 24 * 3600}; path=/; SameSite=Lax`;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class App {
  private controller: SurveyController;
  private locale: Locale = "en";
  private t = makeTranslator("en");
  private dragStart: { x: number; y: number } | null = null;

  constructor(private readonly api: SurveyApi) {
    this.controller = new SurveyController(api, {
      onToast: (key) => this.toast(this.t(key)),
      onCategoryComplete: () => this.toast(this.t("survey.congrats.category")),
    });
  }

  async start(): Promise<void> {
    this.applyLocaleText();
    this.bindControls();
    const existing = readCookie(COOKIE_NAME);
    if (existing) {
      try {
        await this.controller.resume({ cookie_hash: existing });
        this.showSurvey();
        return;
      } catch {
        // stale cookie; fall through to the form
      }
    }
    el("demographics").hidden = false;
  }

  private bindControls(): void {
    el<HTMLFormElement>("demographics-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitForm();
    });
    const buttons = el("rating-buttons");
    SCORE_KEYS.forEach((key, index) => {
      const button = document.createElement("button");
      button.className = "rating";
      button.dataset.index = String(index);
      button.id = `rate-${key}`;
      button.addEventListener("click", () => void this.rate({ kind: "button", index }));
      buttons.appendChild(button);
    });
    el("skip").addEventListener("click", () => void this.skip());
    el("undo").addEventListener("click", () => void this.undo());
    el("fullscreen").addEventListener("click", () => {
      if (document.fullscreenElement) void document.exitFullscreen();
      else void document.documentElement.requestFullscreen();
    });
    el("language").addEventListener("click", () => this.switchLocale());
    el("help").addEventListener("click", () => el("intro").classList.toggle("expanded"));
    el("report").addEventListener("click", () => {
      const message = window.prompt(this.t("action.report")) ?? "";
      if (message) void this.api.reportIssue(message, { image_id: this.controller.pending?.image_id });
    });

    const viewport = el("viewport");
    viewport.addEventListener("pointerdown", (ev) => {
      this.dragStart = { x: ev.clientX, y: ev.clientY };
    });
    viewport.addEventListener("pointerup", (ev) => {
      if (!this.dragStart) return;
      const target = swipeTarget({
        dx: ev.clientX - this.dragStart.x,
        dy: ev.clientY - this.dragStart.y,
        endX: ev.clientX,
        viewportWidth: window.innerWidth,
      });
      this.dragStart = null;
      if (target !== null) void this.rate({ kind: "swipe", index: target });
    });
  }

  private async submitForm(): Promise<void> {
    const form = el<HTMLFormElement>("demographics-form");
    const data = new FormData(form);
    const age = String(data.get("age") ?? "").trim();
    const consent = data.get("consent") === "on";
    if (!age || Number(age) < 18) {
      this.toast(this.t("form.error.age"));
      return;
    }
    if (!consent) {
      this.toast(this.t("form.error.consent"));
      return;
    }
    const creds = await this.controller.begin({
      age,
      consent,
      gender: String(data.get("gender") ?? "") || undefined,
      education: String(data.get("education") ?? "") || undefined,
      monthly_gross_income: String(data.get("income") ?? "") || undefined,
      country: String(data.get("country") ?? "") || undefined,
      postcode: String(data.get("postcode") ?? "") || undefined,
    });
    writeCookie(COOKIE_NAME, creds.cookie_hash);
    el("demographics").hidden = true;
    this.showSurvey();
  }

  private async rate(gesture: { kind: "button" | "swipe"; index: number }): Promise<void> {
    if (!this.controller.pending) return;
    await this.controller.submitInteraction(gesture);
    this.render();
  }

  private async skip(): Promise<void> {
    if (!this.controller.pending) return;
    await this.controller.skip();
    this.render();
  }

  private async undo(): Promise<void> {
    await this.controller.undo();
    this.render();
  }

  private switchLocale(): void {
    this.locale = this.locale === "en" ? "nl" : "en";
    this.controller.setLocale(this.locale);
    this.t = makeTranslator(this.locale);
    this.applyLocaleText();
    this.render();
  }

  private applyLocaleText(): void {
    document.title = this.t("app.title");
    el("intro").textContent = this.t("app.intro");
    for (const key of ["skip", "undo", "help", "fullscreen", "report", "language"]) {
      el(key).textContent = this.t(`action.${key === "language" ? "language" : key}`);
    }
    SCORE_KEYS.forEach((key) => {
      const button = document.getElementById(`rate-${key}`);
      if (button) button.textContent = this.t(`score.${key}`);
    });
    document.querySelectorAll<HTMLElement>("[data-i18n]").forEach((node) => {
      node.textContent = this.t(node.dataset.i18n!);
    });
  }

  private showSurvey(): void {
    el("survey").hidden = false;
    this.render();
  }

  private render(): void {
    const controller = this.controller;
    const progress = controller.progress();
    const barsRoot = el("progress-bars");
    barsRoot.innerHTML = "";
    for (const bar of progress.bars) {
      const row = document.createElement("div");
      row.className = "bar-row" + (bar.done ? " done" : "");
      const label = document.createElement("span");
      label.textContent = `${this.t(`category.${categoryById(bar.categoryId).key}.name`)} ${bar.count}/${bar.cap}`;
      const track = document.createElement("div");
      track.className = "track";
      const fill = document.createElement("div");
      fill.className = "fill";
      fill.style.width = `${Math.round(bar.fraction * 100)}%`;
      track.appendChild(fill);
      row.append(label, track);
      barsRoot.appendChild(row);
    }
    el("progress-total").textContent =
      `${this.t("progress.total")}: ${progress.total}/${progress.totalCap}`;

    if (controller.complete || (controller.exhausted && !controller.pending)) {
      el("image").setAttribute("src", "");
      el("category-name").textContent = this.t("survey.complete.title");
      el("category-description").textContent = this.t("survey.complete.body");
      el("viewport").classList.add("finished");
      return;
    }
    const categoryId = controller.currentCategory;
    if (categoryId !== null) {
      const key = categoryById(categoryId).key;
      el("category-name").textContent = this.t(`category.${key}.name`);
      const description = el("category-description");
      description.title = this.t(`category.${key}.description`);
      description.textContent = controller.isFirstEncounter(categoryId)
        ? this.t(`category.${key}.description`)
        : "";
    }
    if (controller.pending) {
      el<HTMLImageElement>("image").src = controller.pending.url;
    }
    el<HTMLButtonElement>("undo").toggleAttribute("disabled", !controller.undoAvailable);
  }

  private toast(message: string): void {
    const node = el("toast");
    node.textContent = message;
    node.classList.add("visible");
    window.setTimeout(() => node.classList.remove("visible"), 2500);
  }
}

if (typeof document !== "undefined" && document.getElementById("viewport")) {
  const app = new App(new SurveyApi(BACKEND_URL));
  void app.start();
}

export { App, CATEGORIES };
