import { Pad } from './pad.js';
import { ControlPanel } from './panel.js';
import { PadSocket } from './socket.js';

const canvas = document.getElementById('pad') as HTMLCanvasElement;
const status = document.getElementById('status') as HTMLElement;

function fitCanvas(): void {
  const rect = canvas.getBoundingClientRect();
  canvas.width = rect.width * devicePixelRatio;
  canvas.height = rect.height * devicePixelRatio;
}
fitCanvas();
window.addEventListener('resize', fitCanvas);

const scheme = location.protocol === 'https:' ? 'wss' : 'ws';
const socket = new PadSocket({ url: `${scheme}://${location.host}/ws` });
const pad = new Pad(canvas);

pad.onTouch = (event) => socket.sendTouch(event);
socket.onPrediction = (frame) => pad.showPrediction(frame.args);

let announced = false;
socket.onStatus = (connected) => {
  status.textContent = connected ? 'connected' : 'reconnecting…';
  status.className = connected ? 'ok' : 'down';
  if (connected && !announced) {
    announced = true;
    panel.announce();
  }
};

const panel = new ControlPanel(
  {
    mode: document.getElementById('mode') as HTMLSelectElement,
    piTemp: document.getElementById('pi-temp') as HTMLInputElement,
    piTempLabel: document.getElementById('pi-temp-value') as HTMLElement,
    sigmaTemp: document.getElementById('sigma-temp') as HTMLInputElement,
    sigmaTempLabel: document.getElementById('sigma-temp-value') as HTMLElement,
    reset: document.getElementById('reset') as HTMLButtonElement,
  },
  (frame) => socket.sendConfig(frame),
  () => {
    void fetch('/api/reset', { method: 'POST' });
  },
);

socket.connect();

function frame(): void {
  socket.tick();
  pad.render();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
