import init, { Demo } from "./pkg/linevox_wasm.js";

const canvas = document.getElementById("canvas");
const ctx = canvas.getContext("2d");
const info = document.getElementById("info");
const view = { yaw: 30, pitch: 20, zoom: 1 };
let demo;
let queued = false;

function draw() {
  queued = false;
  const opacity = parseFloat(document.getElementById("opacity").value);
  const radius = parseFloat(document.getElementById("radius").value);
  const neighbors = document.getElementById("neighbors").checked;
  const pixels = demo.render(canvas.width, canvas.height, view.yaw, view.pitch, view.zoom, opacity, radius, neighbors);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(pixels), canvas.width, canvas.height), 0, 0);
  const model = JSON.parse(demo.model_info());
  const stats = JSON.parse(demo.last_stats());
  info.textContent =
    `grid ${model.dims.join("x")}, N=${model.bins}: ${model.segments} segments, ${model.bytes} bytes (${model.bytesPerSegment} per segment)\n` +
    `duplicates ${(model.duplicateRate * 100).toFixed(3)}%, built in ${model.buildMs.toFixed(0)} ms\n` +
    `frame ${stats.render_ms.toFixed(0)} ms, ${stats.voxel_steps} voxel steps, ${stats.intersection_tests} intersection tests`;
}

function redraw() {
  if (!queued) {
    queued = true;
    requestAnimationFrame(draw);
  }
}

let drag = null;
canvas.addEventListener("pointerdown", (e) => { drag = [e.clientX, e.clientY]; canvas.setPointerCapture(e.pointerId); });
canvas.addEventListener("pointerup", () => { drag = null; });
canvas.addEventListener("pointermove", (e) => {
  if (!drag) return;
  view.yaw -= (e.clientX - drag[0]) * 0.5;
  view.pitch = Math.max(-89, Math.min(89, view.pitch + (e.clientY - drag[1]) * 0.5));
  drag = [e.clientX, e.clientY];
  redraw();
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  view.zoom = Math.max(0.3, Math.min(8, view.zoom * Math.exp(-e.deltaY * 0.001)));
  redraw();
}, { passive: false });

for (const id of ["opacity", "radius", "neighbors"]) document.getElementById(id).addEventListener("input", redraw);
document.getElementById("bins").addEventListener("change", (e) => {
  demo.set_bins(parseInt(e.target.value, 10));
  redraw();
});

await init();
demo = new Demo(200, 96, 32);
redraw();
