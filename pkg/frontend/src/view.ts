// DOM and canvas layer. Everything here is presentation: values come from
// session.panel() untouched, and pointer math only runs through the view
// transform (zoom never rewrites stored coordinates; only a drag does).

import { ReviewSession, HipPanel } from "./session.js";
import { KEYPOINT_NAMES, KeypointName, Side, SIDES } from "./types.js";

const HIT_RADIUS_PX = 9;

interface DragState {
  side: Side;
  name: KeypointName;
}

export class ReviewView {
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private scale = 1;
  private offsetX = 0;
  private offsetY = 0;
  private drag: DragState | null = null;

  constructor(private session: ReviewSession, private root: HTMLElement) {
    this.canvas = root.querySelector("#viewer") as HTMLCanvasElement;
    this.ctx = this.canvas.getContext("2d")!;
    session.onChange = () => this.render();
    this.bindPointerEvents();
    this.bindControls();
  }

  private bindControls(): void {
    const list = this.root.querySelector("#study-list") as HTMLSelectElement;
    list.addEventListener("change", () => {
      void this.openStudy(list.value);
    });
    (this.root.querySelector("#save") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.session.save()
    );
    (this.root.querySelector("#reload") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.session.reloadFromServer()
    );
    this.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.scale = Math.min(8, Math.max(0.2, this.scale * factor));
      this.render();
    });
  }

  async start(): Promise<void> {
    await this.session.refreshStudies();
    const list = this.root.querySelector("#study-list") as HTMLSelectElement;
    list.innerHTML = "";
    for (const entry of this.session.studies) {
      const option = document.createElement("option");
      option.value = entry.study_id;
      const verdicts = `${entry.verdicts.right ?? "?"}/${entry.verdicts.left ?? "?"}`;
      option.textContent = `${entry.study_id}  (${verdicts})`;
      list.appendChild(option);
    }
    if (this.session.studies.length > 0) {
      await this.openStudy(this.session.studies[0].study_id);
    }
  }

  private async openStudy(studyId: string): Promise<void> {
    await this.session.open(studyId);
    this.image = null;
    if (this.session.imagePath) {
      const img = new Image();
      img.onload = () => {
        this.image = img;
        this.fitToImage(img.width, img.height);
        this.render();
      };
      img.src = this.session.imagePath;
    } else if (this.session.working) {
      const xs: number[] = [];
      const ys: number[] = [];
      for (const side of SIDES) {
        for (const name of KEYPOINT_NAMES) {
          xs.push(this.session.working[side][name][0]);
          ys.push(this.session.working[side][name][1]);
        }
      }
      this.fitToImage(Math.max(...xs) + 60, Math.max(...ys) + 60);
    }
    this.render();
  }

  private fitToImage(width: number, height: number): void {
    this.scale = Math.min(this.canvas.width / width, this.canvas.height / height);
    this.offsetX = 0;
    this.offsetY = 0;
  }

  private toImage(eventX: number, eventY: number): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [
      (eventX - rect.left - this.offsetX) / this.scale,
      (eventY - rect.top - this.offsetY) / this.scale,
    ];
  }

  private hitTest(x: number, y: number): DragState | null {
    if (!this.session.working) return null;
    const radius = HIT_RADIUS_PX / this.scale;
    let best: DragState | null = null;
    let bestDist = radius;
    for (const side of SIDES) {
      for (const name of KEYPOINT_NAMES) {
        const [px, py] = this.session.working[side][name];
        const dist = Math.hypot(px - x, py - y);
        if (dist <= bestDist) {
          best = { side, name };
          bestDist = dist;
        }
      }
    }
    return best;
  }

  private bindPointerEvents(): void {
    this.canvas.addEventListener("pointerdown", (event) => {
      const [x, y] = this.toImage(event.clientX, event.clientY);
      this.drag = this.hitTest(x, y);
      if (this.drag) {
        this.canvas.setPointerCapture(event.pointerId);
        this.session.selectedSide = this.drag.side;
      }
    });
    this.canvas.addEventListener("pointermove", (event) => {
      if (!this.drag) return;
      const [x, y] = this.toImage(event.clientX, event.clientY);
      this.session.moveKeypoint(this.drag.side, this.drag.name, x, y);
    });
    this.canvas.addEventListener("pointerup", () => {
      if (this.drag) {
        this.drag = null;
        void this.session.endDrag();
      }
    });
  }

  render(): void {
    this.paintCanvas();
    for (const side of SIDES) {
      this.paintPanel(side, this.session.panel(side));
    }
    const banner = this.root.querySelector("#banner") as HTMLElement;
    if (this.session.banner) {
      banner.textContent = this.session.banner.message;
      banner.classList.add("visible");
    } else {
      banner.textContent = "";
      banner.classList.remove("visible");
    }
    const error = this.root.querySelector("#inline-error") as HTMLElement;
    error.textContent = this.session.inlineError ?? "";
    const save = this.root.querySelector("#save") as HTMLButtonElement;
    save.disabled = !this.session.dirty;
    const state = this.root.querySelector("#state") as HTMLElement;
    state.textContent = this.session.dirty ? "unsaved edits" : "saved";
  }

  private paintCanvas(): void {
    const { ctx, canvas } = this;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.setTransform(this.scale, 0, 0, this.scale, this.offsetX, this.offsetY);
    if (this.image) {
      ctx.drawImage(this.image, 0, 0);
    }
    const doc = this.session.working;
    if (!doc) return;

    const lineWidth = 1.5 / this.scale;
    // inter-teardrop reference line
    const rt = doc.right.teardrop;
    const lt = doc.left.teardrop;
    ctx.strokeStyle = "#fdd835";
    ctx.lineWidth = lineWidth;
    ctx.setLineDash([6 / this.scale, 4 / this.scale]);
    ctx.beginPath();
    const dx = lt[0] - rt[0];
    const dy = lt[1] - rt[1];
    ctx.moveTo(rt[0] - 0.4 * dx, rt[1] - 0.4 * dy);
    ctx.lineTo(lt[0] + 0.4 * dx, lt[1] + 0.4 * dy);
    ctx.stroke();
    ctx.setLineDash([]);

    for (const side of SIDES) {
      const hip = doc[side];
      ctx.strokeStyle = "#64b5f6";
      ctx.beginPath();
      ctx.moveTo(hip.fh_center[0], hip.fh_center[1]);
      ctx.lineTo(hip.lat_sourcil[0], hip.lat_sourcil[1]);
      ctx.stroke();
      ctx.strokeStyle = "#81c784";
      ctx.beginPath();
      ctx.moveTo(hip.med_sourcil[0], hip.med_sourcil[1]);
      ctx.lineTo(hip.lat_sourcil[0], hip.lat_sourcil[1]);
      ctx.stroke();
      ctx.strokeStyle = "#ba68c8";
      ctx.beginPath();
      ctx.moveTo(hip.teardrop[0], hip.teardrop[1]);
      ctx.lineTo(hip.lat_sourcil[0], hip.lat_sourcil[1]);
      ctx.stroke();
      for (const name of KEYPOINT_NAMES) {
        const [x, y] = hip[name];
        ctx.fillStyle = "#e53935";
        ctx.beginPath();
        ctx.arc(x, y, 3.5 / this.scale, 0, Math.PI * 2);
        ctx.fill();
      }
    }
  }

  private paintPanel(side: Side, panel: HipPanel | null): void {
    const container = this.root.querySelector(`#panel-${side}`) as HTMLElement;
    const byId = (suffix: string) =>
      container.querySelector(`[data-cell="${suffix}"]`) as HTMLElement;
    if (!panel) {
      container.classList.add("empty");
      return;
    }
    container.classList.remove("empty");
    for (const cell of panel.cells) {
      const value = byId(cell.label);
      value.textContent = cell.text;
      value.classList.toggle("red", cell.red);
      byId(`${cell.label}-score`).textContent = cell.score;
    }
    byId("displacement").textContent = panel.displacement;
    byId("pelvic-height").textContent = panel.pelvicHeight;
    byId("crowe-ratio").textContent = panel.croweRatio;
    byId("total").textContent = panel.totalScore;
    const verdict = byId("verdict");
    verdict.textContent =
      panel.verdict + (panel.croweGrade ? `, Crowe ${panel.croweGrade}` : "");
    verdict.classList.toggle("red", panel.verdict === "DDH present");
  }
}
