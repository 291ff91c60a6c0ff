// Protocol client: every pixel comes from the render service.
const params = new URLSearchParams(location.search);
const wsUrl = params.get("ws") || `ws://${location.hostname || "localhost"}:9870/ws`;
const canvas = document.getElementById("canvas");
const ctx = canvas.getContext("2d");
const banner = document.getElementById("banner");
const badge = document.getElementById("badge");
const statsEl = document.getElementById("stats");

let ws = null;
let lastFrameId = 0;
let decoding = false;
let orbit = { yaw: 30, pitch: 20, dist: 0, center: [0, 0, 0] };
let lastCameraSent = 0;
let cameraTimer = null;

function send(msg) {
  if (ws && ws.readyState === WebSocket.OPEN) ws.send(JSON.stringify(msg));
}

function cameraMessage() {
  const y = orbit.yaw * Math.PI / 180, p = orbit.pitch * Math.PI / 180;
  const c = orbit.center;
  const pos = [c[0] + orbit.dist * Math.cos(p) * Math.cos(y), c[1] + orbit.dist * Math.cos(p) * Math.sin(y), c[2] + orbit.dist * Math.sin(p)];
  return { type: "camera", pos, target: c, up: [0, 0, 1], fov: 45, width: canvas.width, height: canvas.height };
}

// At most one camera message per 16 ms.
function sendCamera() {
  const wait = 16 - (performance.now() - lastCameraSent);
  if (wait > 0) {
    if (!cameraTimer) cameraTimer = setTimeout(() => { cameraTimer = null; sendCamera(); }, wait);
    return;
  }
  lastCameraSent = performance.now();
  send(cameraMessage());
}

function onStats(s) {
  badge.textContent = s.quality;
  badge.className = s.quality;
  statsEl.textContent = `frame ${s.frameId}\n${s.width}x${s.height}\n${s.renderMs.toFixed(1)} ms\n${s.voxelSteps} voxel steps\n${s.tests} tests`;
}

async function onFrame(buf) {
  const view = new DataView(buf);
  if (buf.byteLength < 9) return console.warn("short frame dropped");
  const id = view.getUint32(0, true), w = view.getUint16(4, true), h = view.getUint16(6, true), format = view.getUint8(8);
  if (id <= lastFrameId || decoding) return;
  const payload = new Uint8Array(buf, 9);
  decoding = true;
  try {
    let bitmap;
    if (format === 0) {
      if (payload.length !== w * h * 4) throw new Error(`expected ${w * h * 4} bytes, got ${payload.length}`);
      bitmap = await createImageBitmap(new ImageData(new Uint8ClampedArray(payload), w, h));
    } else if (format === 1) {
      bitmap = await createImageBitmap(new Blob([payload], { type: "image/png" }));
    } else {
      throw new Error(`unknown format ${format}`);
    }
    if (id > lastFrameId) {
      lastFrameId = id;
      ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
    }
  } catch (e) {
    console.warn("frame dropped:", e);
  } finally {
    decoding = false;
  }
}

function connect() {
  ws = new WebSocket(wsUrl);
  ws.binaryType = "arraybuffer";
  ws.onopen = () => {
    banner.style.display = "none";
    lastFrameId = 0;
    send({ type: "loadScene", name: document.getElementById("scene").value });
  };
  ws.onmessage = (ev) => {
    if (typeof ev.data !== "string") return onFrame(ev.data);
    const msg = JSON.parse(ev.data);
    if (msg.type === "stats") onStats(msg);
    else if (msg.type === "sceneLoaded") {
      orbit.center = msg.dims.map((d) => d / 2);
      orbit.dist = 1.1 * Math.hypot(...msg.dims);
      sendCamera();
    } else if (msg.type === "error") console.warn("server:", msg.message);
  };
  ws.onclose = () => {
    banner.style.display = "block";
    setTimeout(connect, 1000);
  };
}

let dragging = null;
canvas.addEventListener("pointerdown", (e) => { dragging = [e.clientX, e.clientY]; canvas.setPointerCapture(e.pointerId); });
canvas.addEventListener("pointerup", () => { dragging = null; });
canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  orbit.yaw -= (e.clientX - dragging[0]) * 0.4;
  orbit.pitch = Math.max(-89, Math.min(89, orbit.pitch + (e.clientY - dragging[1]) * 0.4));
  dragging = [e.clientX, e.clientY];
  sendCamera();
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  orbit.dist *= Math.exp(e.deltaY * 0.001);
  sendCamera();
}, { passive: false });

let paramTimer = null;
const pendingParams = {};
for (const id of ["base_opacity", "tube_radius", "opacity_mode", "neighbor_mode", "shadow_mode", "ao_mode"]) {
  const el = document.getElementById(id);
  el.addEventListener("input", () => {
    pendingParams[id] = el.type === "range" ? parseFloat(el.value) : el.value;
    clearTimeout(paramTimer);
    paramTimer = setTimeout(() => {
      send({ type: "params", ...pendingParams });
      for (const k of Object.keys(pendingParams)) delete pendingParams[k];
    }, 100);
  });
}
document.getElementById("scene").addEventListener("change", (e) => send({ type: "loadScene", name: e.target.value }));

connect();
