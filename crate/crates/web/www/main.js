import init, { track_demo, repulsion_demo, query_demo } from "./pkg/ovc_web.js";

const $ = (id) => document.getElementById(id);
const ZOOM = 6;

function paint(canvas, rgba, width, height, zoom = ZOOM) {
  canvas.width = width * zoom;
  canvas.height = height * zoom;
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  const off = new OffscreenCanvas(width, height);
  off.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), width, height), 0, 0);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  return ctx;
}

function showError(el, err) {
  el.innerHTML = "";
  const span = document.createElement("span");
  span.className = "error";
  span.textContent = String(err.message ?? err);
  el.appendChild(span);
}

// Tracking

let view = null;

function drawFrame() {
  if (!view) return;
  const f = Number($("t-frame").value);
  $("t-frame-label").textContent = `${f + 1} / ${view.frames()}`;
  paint($("t-truth"), view.truth_rgba(f), view.width(), view.height());
  paint($("t-pred"), view.frame_rgba(f), view.width(), view.height());
}

function runTracking() {
  try {
    view?.free();
    view = track_demo(
      $("t-scenario").value,
      BigInt($("t-seed").value),
      Number($("t-beta1").value),
      Number($("t-beta2").value),
      Number($("t-tmem").value),
    );
  } catch (err) {
    view = null;
    showError($("t-stats"), err);
    return;
  }
  $("t-frame").max = view.frames() - 1;
  $("t-frame").value = Math.min(Number($("t-frame").value), view.frames() - 1);
  $("t-stats").textContent =
    `tracks ${view.track_count()}  id switches ${view.id_switches()}  ` +
    `association ${view.assoc_acc().toFixed(3)}  mean IoU ${view.mean_iou().toFixed(3)}`;
  drawFrame();
}

// Repulsion

function runRepulsion() {
  let r;
  try {
    r = repulsion_demo(Number($("r-eps").value), Number($("r-alpha").value), Number($("r-leak").value));
  } catch (err) {
    showError($("r-stats"), err);
    return;
  }
  paint($("r-grad"), r.gradient_rgba(), r.size(), r.size(), 10);
  const fmt = (x) => x.toFixed(4);
  $("r-stats").textContent =
    `box IoU ${fmt(r.box_iou())}  threshold ${$("r-eps").value}  neighbors ${r.neighbors()}\n` +
    `bce ${fmt(r.bce())}  bce_inter ${fmt(r.bce_inter())}  dice ${fmt(r.dice())}  dice_inter ${fmt(r.dice_inter())}`;
  $("r-stats").style.whiteSpace = "pre";
  r.free();
}

// Queries

const ALIGN_COLORS = ["#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4",
  "#46f0f0", "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff"];

function runQueries() {
  let q;
  try {
    q = query_demo(BigInt($("q-seed").value), Number($("q-rows").value), Number($("q-cols").value),
      Number($("q-window").value));
  } catch (err) {
    showError($("q-stats"), err);
    return;
  }
  const holder = $("q-frames");
  holder.innerHTML = "";
  const [h, w, zoom] = [q.height(), q.width(), 14];
  for (let t = 0; t < q.frames(); t++) {
    const resp = q.response(t);
    const rgba = new Uint8Array(h * w * 4);
    resp.forEach((v, i) => {
      const g = Math.round(Math.max(0, Math.min(1, v)) * 200);
      rgba.set([g, g, g, 255], i * 4);
    });
    const canvas = document.createElement("canvas");
    canvas.title = t === q.central() ? `frame ${t} (central)` : `frame ${t}`;
    const ctx = paint(canvas, rgba, w, h, zoom);
    const dot = (y, x, color, r) => {
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc((x + 0.5) * zoom, (y + 0.5) * zoom, r, 0, 2 * Math.PI);
      ctx.fill();
    };
    const peaks = q.peaks(t);
    for (let i = 0; i < peaks.length; i += 2) dot(peaks[i], peaks[i + 1], "#fff", 2);
    const aligned = q.aligned(t);
    for (let i = 0; i < aligned.length; i += 2) {
      dot(aligned[i], aligned[i + 1], ALIGN_COLORS[(i / 2) % ALIGN_COLORS.length], 4);
    }
    holder.appendChild(canvas);
  }
  $("q-stats").textContent = `${q.frames()} frames, ${q.peaks(0).length / 2} queries per frame, central frame ${q.central()}`;
  q.free();
}

await init();

$("t-run").addEventListener("click", runTracking);
$("t-frame").addEventListener("input", drawFrame);
for (const id of ["r-eps", "r-alpha", "r-leak"]) $(id).addEventListener("input", runRepulsion);
for (const id of ["q-seed", "q-rows", "q-cols", "q-window"]) $(id).addEventListener("change", runQueries);

runTracking();
runRepulsion();
runQueries();
