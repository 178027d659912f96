import { startApp } from './app';

void startApp(document.getElementById('app')!);
